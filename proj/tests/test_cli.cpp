#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "pinfer/cli/cli.hpp"

using namespace pinfer;
using namespace pinfer::cli;

namespace {

cli::EnvLookup env_of(std::map<std::string, std::string> m) {
  return [m = std::move(m)](const std::string& k) -> std::optional<std::string> {
    auto it = m.find(k);
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
}

ErrorCode usage_code(const std::vector<std::string>& args, const cli::EnvLookup& env = env_of({})) {
  try {
    resolve_config(args, env);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST(Config, FlagsOverrideEnvOverrideFile) {
  const auto path = std::filesystem::temp_directory_path() / "pinfer-cli-config.json";
  std::ofstream(path) << R"({"role": "cloud-server", "listen": "0.0.0.0:1", "key": "file.key", "seed": 5,
                            "timeout-ms": 100})";
  const auto env = env_of({{"PINFER_CONFIG", path.string()}, {"PINFER_KEY", "env.key"}, {"PINFER_SEED", "6"}});
  auto c = resolve_config({"--seed", "7"}, env);
  EXPECT_EQ(c.role, Role::kCloudServer);
  EXPECT_EQ(c.listen, "0.0.0.0:1");
  EXPECT_EQ(c.key, "env.key");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.timeout_ms, 100u);
  c = resolve_config({"--key", "flag.key"}, env);
  EXPECT_EQ(c.key, "flag.key");
  EXPECT_EQ(c.seed, 6u);
  std::filesystem::remove(path);
}

TEST(Config, HostPortAndPeerKeyEnvironment) {
  const auto c = resolve_config({"--role", "model-server", "--model", "m.pinf", "--key", "k", "--peer", "h:1"},
                                env_of({{"HOST", "10.0.0.2"}, {"PORT", "9000"}, {"PEER_KEY_FILE", "cloud.pub"}}));
  EXPECT_EQ(c.listen, "10.0.0.2:9000");
  EXPECT_EQ(c.peer_key, "cloud.pub");
}

TEST(Config, DefaultsAndLists) {
  const auto c = resolve_config({"--role", "bench", "--models", "mlp,lenet5", "--ot", "dealer", "--trunc", "local"},
                                env_of({}));
  EXPECT_EQ(c.models, (std::vector<std::string>{"mlp", "lenet5"}));
  EXPECT_EQ(c.ot, runtime::OtBackend::kDealer);
  EXPECT_EQ(c.trunc, gadgets::TruncMode::kLocal);
  EXPECT_EQ(c.out, "logits.tnsr");
  EXPECT_FALSE(c.seed.has_value());
  EXPECT_EQ(default_batch("mlp"), 64u);
  EXPECT_EQ(default_batch("lenet5"), 32u);
  EXPECT_EQ(default_batch("alexnet"), 1u);
}

TEST(Config, UsageErrors) {
  EXPECT_EQ(usage_code({}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "oracle"}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "bench", "--bogus", "1"}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "bench", "--seed", "abc"}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "bench", "--ot", "magic"}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "bench", "--router", "chat"}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "cloud-server", "--listen", "127.0.0.1:0"}), ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "user", "--registry", "r", "--registry-key", "k", "--input", "x"}),
            ErrorCode::kUsage);
  EXPECT_EQ(usage_code({"--role", "bench"}, env_of({{"PINFER_CONFIG", "/nonexistent/pinfer.json"}})),
            ErrorCode::kUsage);
}

TEST(ExitCodes, DistinctPerError) {
  std::set<int> seen{0, 1};
  for (int c = 0; c <= static_cast<int>(ErrorCode::kInternal); ++c) {
    const int code = exit_code(static_cast<ErrorCode>(c));
    EXPECT_TRUE(seen.insert(code).second) << error_code_name(static_cast<ErrorCode>(c));
    EXPECT_LT(code, 126);
  }
  EXPECT_EQ(exit_code(ErrorCode::kUsage), 2);
  EXPECT_EQ(exit_code(ErrorCode::kNoRoute), 36);
}

TEST(Run, UsageErrorReturnsTwoAndBenchRuns) {
  EXPECT_EQ(run({"--role", "nope"}, env_of({})), 2);
  EXPECT_EQ(run({"--role", "bench", "--models", "identity", "--batch", "2", "--ot", "dealer"}, env_of({})), 0);
}
