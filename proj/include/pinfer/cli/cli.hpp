#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pinfer/common/error.hpp"
#include "pinfer/model/model.hpp"
#include "pinfer/runtime/runtime.hpp"

namespace pinfer::cli {

enum class Role { kModelServer, kCloudServer, kUser, kBench };

const char* role_name(Role r);
Role parse_role(const std::string& s);

struct RunConfig {
  Role role = Role::kUser;
  std::string model;        // model file (model-server)
  std::string listen;       // host:port (servers)
  std::string peer;         // cloud host:port (model-server)
  std::string peer_key;     // pinned peer public key file
  std::string key;          // own static identity file
  std::string registry;     // signed registry (user)
  std::string registry_key; // trusted registry signer (user)
  std::string query;
  std::string input;        // tensor file (binary or text)
  std::string labels;       // one label per line
  std::string out = "logits.tnsr";
  std::string stats;        // daemons: JSON stats written on exit
  std::string json;         // bench: machine-readable report
  std::string router = "keyword";
  std::string chat_url;     // external chat endpoint for router/composer
  std::vector<std::string> models;  // bench: fixture names or model files
  std::size_t batch = 0;            // bench: 0 selects the paper's batch size
  std::optional<std::uint64_t> seed;
  gadgets::TruncMode trunc = gadgets::TruncMode::kFaithful;
  runtime::OtBackend ot = runtime::OtBackend::kReal;
  std::uint32_t timeout_ms = 30000;
  std::string inject_fault;  // test hook for the user role
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// Flags override environment variables (PINFER_<FLAG>, plus HOST, PORT and
// PEER_KEY_FILE), which override the JSON config file named by --config.
// Throws kUsage on unknown flags, bad values or missing role-required fields.
RunConfig resolve_config(const std::vector<std::string>& args, const EnvLookup& env);

// Distinct process exit code for every error code; 0 is success and 1 an
// unexpected failure.
int exit_code(ErrorCode code);

// Paper batch convention: 64 for the MLP, 32 for LeNet-5, 1 otherwise.
std::size_t default_batch(const std::string& model);
// Fixture name ("mlp", "lenet5", "identity") or model file path.
model::ModelSpec load_bench_model(const std::string& name_or_path, std::uint64_t seed);

struct BenchRun {
  runtime::SessionReport report;
  std::uint64_t socket_bytes = 0;  // counted by the owner's TCP transport
  bool matches_plaintext = false;
};
// One owner/cloud session over loopback TCP on random inputs.
BenchRun bench_model(const model::ModelSpec& m, std::size_t batch, const runtime::SessionOptions& opts,
                     std::uint64_t seed);

int run(const std::vector<std::string>& args, const EnvLookup& env);

}  // namespace pinfer::cli
