// Operator utilities: keys, fixtures, inputs and registries.
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "pinfer/cli/cli.hpp"
#include "pinfer/orchestrator/orchestrator.hpp"

using namespace pinfer;

namespace {

std::unique_ptr<RandomSource> rng_from(const std::optional<std::uint64_t>& seed, std::string_view label) {
  if (seed) return std::make_unique<Prng>(Prng::derive_seed(*seed, label));
  return std::make_unique<OsEntropy>();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

std::map<std::string, std::string> fields(const std::string& spec) {
  std::map<std::string, std::string> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kUsage, "expected key=value in '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

std::vector<std::string> csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pinfer-tool: keys, fixtures, inputs and registries"};
  app.require_subcommand(1);

  std::string out, model_name, input, signing_key;
  std::optional<std::uint64_t> seed;
  bool signing = false, text = false;
  std::size_t batch = 1;
  std::vector<std::string> servers, rules;

  auto* keygen = app.add_subcommand("keygen", "X25519 identity (or Ed25519 registry signing key with --signing)");
  keygen->add_option("--out", out)->required();
  keygen->add_option("--seed", seed);
  keygen->add_flag("--signing", signing);

  auto* fixture = app.add_subcommand("fixture", "write a fixture model (mlp, lenet5, identity)");
  fixture->add_option("--model", model_name)->required();
  fixture->add_option("--seed", seed);
  fixture->add_option("--out", out)->required();

  auto* inp = app.add_subcommand("input", "random input tensor in [-1, 1) for a model");
  inp->add_option("--model", model_name)->required();
  inp->add_option("--batch", batch);
  inp->add_option("--seed", seed);
  inp->add_option("--out", out)->required();
  inp->add_flag("--text", text);

  auto* plain = app.add_subcommand("plain", "plaintext fixed-point inference");
  plain->add_option("--model", model_name)->required();
  plain->add_option("--input", input)->required();
  plain->add_option("--out", out)->required();

  auto* inspect = app.add_subcommand("inspect", "validate a model file and print layer shapes");
  inspect->add_option("--model", model_name)->required();

  auto* registry = app.add_subcommand("registry", "build and sign a server registry");
  registry->add_option("--signing-key", signing_key)->required();
  registry->add_option("--server", servers,
                       "id=..;endpoint=host:port;caps=a,b;key=FILE[;model=FILE][;labels=a,b]")
      ->required();
  registry->add_option("--rule", rules, "tag=keyword,keyword");
  registry->add_option("--out", out)->required();

  auto* codes = app.add_subcommand("exit-codes", "print the pinfer exit code table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*keygen) {
      auto rng = rng_from(seed, signing ? "tool/signing" : "tool/identity");
      if (signing) {
        write_text(out, orch::SigningKey::generate(*rng).to_json());
      } else {
        net::StaticKeyPair::generate(*rng).save(out);
      }
      std::printf("%s\n", out.c_str());
    } else if (*fixture) {
      const auto m = cli::load_bench_model(model_name, seed.value_or(1));
      model::save_model_file(m, out);
      std::printf("%s: %zu layers\n", out.c_str(), m.layers.size());
    } else if (*inp) {
      const auto m = cli::load_bench_model(model_name, 1);
      std::mt19937_64 g(seed.value_or(1));
      std::uniform_real_distribution<double> d(-1, 1);
      Shape s{batch};
      s.insert(s.end(), m.input_shape.begin(), m.input_shape.end());
      std::vector<double> v(shape_size(s));
      for (auto& x : v) x = d(g);
      const auto t = FixedTensor::from_reals(s, v, m.ring);
      if (text) {
        std::ostringstream os;
        os << "shape";
        for (auto dim : s) os << " " << dim;
        os << "\n";
        for (double r : t.to_reals()) os << r << "\n";
        write_text(out, os.str());
      } else {
        model::save_tensor_file(t, out);
      }
    } else if (*plain) {
      const auto m = cli::load_bench_model(model_name, 1);
      model::save_tensor_file(model::plaintext_infer(m, model::load_tensor_file(input, m.ring)), out);
    } else if (*inspect) {
      const auto m = model::load_model_file(model_name);
      const auto report = model::validate_graph(m);
      std::printf("%s: input %s, %zu layers\n", m.name.c_str(), shape_string(m.input_shape).c_str(), m.layers.size());
      for (std::size_t i = 0; i < m.layers.size(); ++i) {
        std::printf("  L%zu %-9s -> %s\n", i, model::kind_name(m.layers[i].kind),
                    i < report.shapes.size() ? shape_string(report.shapes[i]).c_str() : "?");
      }
      if (!report.ok()) {
        std::printf("%s\n", report.str().c_str());
        return cli::exit_code(ErrorCode::kValidation);
      }
    } else if (*registry) {
      orch::ServerRegistry reg;
      for (const auto& spec : servers) {
        auto f = fields(spec);
        orch::ServerEntry e;
        e.id = f["id"];
        e.endpoint = net::Endpoint::parse(f["endpoint"]);
        e.capabilities = csv(f["caps"]);
        e.public_key = net::load_public_key(f["key"]);
        if (f.contains("model")) e.input_shape = cli::load_bench_model(f["model"], 1).input_shape;
        if (f.contains("labels")) e.labels = csv(f["labels"]);
        reg.servers.push_back(std::move(e));
      }
      for (const auto& r : rules) {
        const auto eq = r.find('=');
        if (eq == std::string::npos) fail(ErrorCode::kUsage, "rule must be tag=keywords");
        reg.rules.push_back({r.substr(0, eq), csv(r.substr(eq + 1))});
      }
      reg = orch::registry_from_json(orch::registry_to_json(reg));
      const auto b = model::read_file(signing_key);
      write_text(out, orch::sign_registry(reg, orch::SigningKey::from_json(std::string(b.begin(), b.end()))));
    } else if (*codes) {
      std::printf("%-4s %s\n", "0", "success");
      std::printf("%-4s %s\n", "1", "unexpected failure");
      for (int c = 0; c <= static_cast<int>(ErrorCode::kInternal); ++c) {
        const auto code = static_cast<ErrorCode>(c);
        std::printf("%-4d %s\n", cli::exit_code(code), error_code_name(code));
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "pinfer-tool: %s\n", e.what());
    return cli::exit_code(e.code());
  }
  return 0;
}
