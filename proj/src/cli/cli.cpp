#include "pinfer/cli/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pinfer/orchestrator/orchestrator.hpp"
#include "pinfer/sharing.hpp"

namespace pinfer::cli {

using nlohmann::json;

const char* role_name(Role r) {
  switch (r) {
    case Role::kModelServer: return "model-server";
    case Role::kCloudServer: return "cloud-server";
    case Role::kUser: return "user";
    case Role::kBench: return "bench";
  }
  return "?";
}

Role parse_role(const std::string& s) {
  for (Role r : {Role::kModelServer, Role::kCloudServer, Role::kUser, Role::kBench}) {
    if (s == role_name(r)) return r;
  }
  fail(ErrorCode::kUsage, "unknown role '" + s + "' (model-server, cloud-server, user, bench)");
}

namespace {

const std::vector<std::string> kOptions = {"role",   "config",  "model",    "listen",      "peer",   "peer-key",
                                           "key",    "registry", "registry-key", "query", "input",  "labels",
                                           "out",    "stats",   "json",     "router",      "chat-url", "models",
                                           "batch",  "seed",    "trunc",    "ot",          "timeout-ms",
                                           "inject-fault"};

std::string env_name(const std::string& opt) {
  std::string s = "PINFER_";
  for (char c : opt) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::uint64_t parse_u64(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos, 0);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    fail(ErrorCode::kUsage, "--" + name + " expects an unsigned integer, got '" + v + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

RunConfig resolve_config(const std::vector<std::string>& args, const EnvLookup& env) {
  CLI::App app{"pinfer: two-party private inference"};
  std::map<std::string, std::string> flags;
  for (const auto& o : kOptions) app.add_option("--" + o, flags[o]);
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    fail(ErrorCode::kUsage, e.what());
  }

  std::map<std::string, std::string> v;
  auto config_path = app.count("--config") ? std::optional(flags["config"]) : env(env_name("config"));
  if (config_path) {
    json doc;
    try {
      std::ifstream in(*config_path);
      if (!in) fail(ErrorCode::kUsage, "cannot read config file " + *config_path);
      doc = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::kUsage, "config file " + *config_path + ": " + e.what());
    }
    for (const auto& [k, val] : doc.items()) {
      if (std::find(kOptions.begin(), kOptions.end(), k) == kOptions.end()) {
        fail(ErrorCode::kUsage, "unknown config key '" + k + "'");
      }
      v[k] = val.is_string() ? val.get<std::string>() : val.dump();
    }
  }
  const auto host = env("HOST"), port = env("PORT");
  if (host || port) v["listen"] = host.value_or("127.0.0.1") + ":" + port.value_or("0");
  if (auto k = env("PEER_KEY_FILE")) v["peer-key"] = *k;
  for (const auto& o : kOptions) {
    if (auto e = env(env_name(o))) v[o] = *e;
  }
  for (const auto& o : kOptions) {
    if (app.count("--" + o)) v[o] = flags[o];
  }

  RunConfig c;
  if (!v.contains("role")) fail(ErrorCode::kUsage, "--role is required (model-server, cloud-server, user, bench)");
  c.role = parse_role(v["role"]);
  auto get = [&](const char* k, std::string& dst) {
    if (v.contains(k)) dst = v[k];
  };
  get("model", c.model);
  get("listen", c.listen);
  get("peer", c.peer);
  get("peer-key", c.peer_key);
  get("key", c.key);
  get("registry", c.registry);
  get("registry-key", c.registry_key);
  get("query", c.query);
  get("input", c.input);
  get("labels", c.labels);
  get("out", c.out);
  get("stats", c.stats);
  get("json", c.json);
  get("router", c.router);
  get("chat-url", c.chat_url);
  get("inject-fault", c.inject_fault);
  if (v.contains("models")) c.models = split(v["models"], ',');
  if (v.contains("batch")) c.batch = parse_u64("batch", v["batch"]);
  if (v.contains("seed")) c.seed = parse_u64("seed", v["seed"]);
  if (v.contains("timeout-ms")) c.timeout_ms = static_cast<std::uint32_t>(parse_u64("timeout-ms", v["timeout-ms"]));
  try {
    if (v.contains("trunc")) c.trunc = runtime::parse_trunc(v["trunc"]);
    if (v.contains("ot")) c.ot = runtime::parse_ot(v["ot"]);
  } catch (const Error& e) {
    fail(ErrorCode::kUsage, e.what());
  }
  if (c.router != "keyword" && c.router != "chat") fail(ErrorCode::kUsage, "--router must be keyword or chat");
  if (c.router == "chat" && c.chat_url.empty()) fail(ErrorCode::kUsage, "--router chat needs --chat-url");

  auto need = [&](const std::string& val, const char* name) {
    if (val.empty()) fail(ErrorCode::kUsage, std::string("--") + name + " is required for role " + role_name(c.role));
  };
  switch (c.role) {
    case Role::kModelServer:
      need(c.model, "model");
      need(c.listen, "listen");
      need(c.key, "key");
      need(c.peer, "peer");
      need(c.peer_key, "peer-key");
      break;
    case Role::kCloudServer:
      need(c.listen, "listen");
      need(c.key, "key");
      break;
    case Role::kUser:
      need(c.registry, "registry");
      need(c.registry_key, "registry-key");
      need(c.query, "query");
      need(c.input, "input");
      break;
    case Role::kBench:
      break;
  }
  return c;
}

int exit_code(ErrorCode code) {
  if (code == ErrorCode::kUsage) return 2;
  return 10 + static_cast<int>(code);
}

std::size_t default_batch(const std::string& model) {
  if (model == "mlp") return 64;
  if (model == "lenet5") return 32;
  return 1;
}

model::ModelSpec load_bench_model(const std::string& name_or_path, std::uint64_t seed) {
  if (name_or_path == "mlp") return model::make_mlp(seed);
  if (name_or_path == "lenet5") return model::make_lenet5(seed);
  if (name_or_path == "identity") return model::make_identity(16);
  return model::load_model_file(name_or_path);
}

BenchRun bench_model(const model::ModelSpec& m, std::size_t batch, const runtime::SessionOptions& opts,
                     std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  Shape s{batch};
  s.insert(s.end(), m.input_shape.begin(), m.input_shape.end());
  std::vector<double> vals(shape_size(s));
  for (auto& x : vals) x = d(g);
  const auto x = FixedTensor::from_reals(s, vals, m.ring);
  Prng share_rng(Prng::derive_seed(seed, "bench/share"));
  const auto sh = share(x, share_rng);
  auto o = opts;
  o.dealer_seed = Prng::derive_seed(seed, "bench/dealer");

  net::TcpListener listener(net::Endpoint{"127.0.0.1", 0});
  Prng owner_rng(Prng::derive_seed(seed, "bench/owner")), cloud_rng(Prng::derive_seed(seed, "bench/cloud"));
  const auto owner_id = net::StaticKeyPair::generate(owner_rng), cloud_id = net::StaticKeyPair::generate(cloud_rng);
  runtime::PeerResult cloud_res;
  std::exception_ptr cloud_err;
  std::thread cloud([&] {
    try {
      auto t = listener.accept(std::chrono::seconds(30));
      require(t != nullptr, ErrorCode::kTimeout, "bench owner never connected");
      auto hs = net::handshake_respond(std::move(t), {cloud_id, owner_id.public_key}, cloud_rng);
      cloud_res = runtime::run_cloud_session(*hs.channel, sh.share1, o, cloud_rng);
    } catch (...) {
      cloud_err = std::current_exception();
    }
  });
  BenchRun out;
  std::exception_ptr owner_err;
  try {
    auto t = net::tcp_connect(net::Endpoint{"127.0.0.1", listener.port()}, std::chrono::seconds(30));
    net::SessionId sid{};
    owner_rng.fill(sid);
    auto hs = net::handshake_initiate(std::move(t), sid, net::Purpose::kPeer, {owner_id, cloud_id.public_key},
                                      owner_rng);
    auto res = runtime::run_owner_session(*hs.channel, m, sh.share0, o, owner_rng);
    out.report = res.report;
    out.socket_bytes = hs.channel->transport().bytes_sent() + hs.channel->transport().bytes_received();
    cloud.join();
    if (!cloud_err) out.matches_plaintext = reconstruct(res.share, cloud_res.share) == model::plaintext_infer(m, x);
  } catch (...) {
    owner_err = std::current_exception();
    if (cloud.joinable()) cloud.join();
  }
  if (owner_err) std::rethrow_exception(owner_err);
  if (cloud_err) std::rethrow_exception(cloud_err);
  return out;
}

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

orch::ServerConfig server_config(const RunConfig& c) {
  orch::ServerConfig sc;
  sc.identity = net::StaticKeyPair::load(c.key);
  sc.session.trunc = c.trunc;
  sc.session.ot = c.ot;
  sc.seed = c.seed;
  sc.timeout = std::chrono::milliseconds(c.timeout_ms);
  return sc;
}

json reports_json(const std::vector<runtime::SessionReport>& reports) {
  return runtime::emit_json(reports);
}

int serve(orch::Daemon& d, const RunConfig& c) {
  net::TcpListener listener(net::Endpoint::parse(c.listen));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("pinfer %s listening on %s:%u\n", role_name(c.role), net::Endpoint::parse(c.listen).host.c_str(),
              listener.port());
  std::fflush(stdout);
  spdlog::info("role={} listen_port={} trunc={} ot={}", role_name(c.role), listener.port(),
               runtime::trunc_name(c.trunc), runtime::ot_name(c.ot));
  d.serve(listener, g_stop);
  const auto reports = d.reports();
  std::printf("%s", runtime::emit_table(reports).c_str());
  std::printf("sessions: %zu ok, %zu failed\n", reports.size(), d.failures());
  if (!c.stats.empty()) {
    auto doc = reports_json(reports);
    doc["failed_sessions"] = d.failures();
    std::ofstream(c.stats) << doc.dump(2) << "\n";
  }
  spdlog::info("shutdown sessions={} failed={}", reports.size(), d.failures());
  return 0;
}

std::vector<std::string> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read labels file " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

orch::UserOptions user_options(const RunConfig& c) {
  orch::UserOptions o;
  o.timeout = std::chrono::milliseconds(c.timeout_ms);
  const std::string& f = c.inject_fault;
  if (f.empty()) return o;
  if (f == "aead-x1") {
    o.tamper = orch::Tamper::kX1Ciphertext;
  } else if (f == "aead-res1") {
    o.tamper = orch::Tamper::kRes1Ciphertext;
  } else if (f == "encapsulation") {
    o.tamper = orch::Tamper::kEncapsulation;
  } else if (f.rfind("frame-cloud:", 0) == 0 || f.rfind("frame-model:", 0) == 0) {
    const bool cloud = f.rfind("frame-cloud:", 0) == 0;
    const std::uint64_t offset = parse_u64("inject-fault", f.substr(f.find(':') + 1));
    o.wrap = [cloud, offset](std::unique_ptr<net::Transport> t,
                             const orch::ServerEntry& s) -> std::unique_ptr<net::Transport> {
      if (s.has(orch::kCloudCapability) != cloud) return t;
      return std::make_unique<net::FaultyTransport>(std::move(t), offset);
    };
  } else {
    fail(ErrorCode::kUsage, "unknown fault '" + f + "'");
  }
  return o;
}

void print_link(const char* name, const net::CommStats& s) {
  std::printf("  %-6s sent %10llu B  received %10llu B  rounds %llu\n", name,
              static_cast<unsigned long long>(s.total_sent), static_cast<unsigned long long>(s.total_received),
              static_cast<unsigned long long>(s.rounds));
}

int run_user(const RunConfig& c) {
  const auto trusted = net::load_public_key(c.registry_key);
  const auto doc = model::read_file(c.registry);
  const auto reg = orch::verify_registry(std::string(doc.begin(), doc.end()), trusted);
  std::unique_ptr<orch::Router> router;
  std::optional<orch::ChatClient> chat;
  if (!c.chat_url.empty()) chat.emplace(c.chat_url, "default");
  if (c.router == "chat") {
    router = std::make_unique<orch::ChatRouter>(*chat);
  } else {
    router = std::make_unique<orch::KeywordRouter>();
  }
  const auto x = model::load_tensor_file(c.input);
  const auto plan = orch::route_intent(c.query, reg, *router);
  std::printf("route: task %s -> model server %s (%s), cloud server %s (%s)\n", plan.task.c_str(),
              plan.model.id.c_str(), plan.model.endpoint.str().c_str(), plan.cloud.id.c_str(),
              plan.cloud.endpoint.str().c_str());

  std::unique_ptr<RandomSource> rng;
  if (c.seed) {
    rng = std::make_unique<Prng>(Prng::derive_seed(*c.seed, "user"));
  } else {
    rng = std::make_unique<OsEntropy>();
  }
  const auto out = orch::dispatch_and_reconstruct(x, plan, *rng, user_options(c));
  model::save_tensor_file(out.result, c.out);

  std::vector<std::string> labels;
  if (!c.labels.empty()) {
    labels = read_labels(c.labels);
  } else if (!plan.model.labels.empty()) {
    labels = plan.model.labels;
  } else {
    const std::size_t n = out.result.shape().empty() ? 0 : out.result.shape().back();
    for (std::size_t i = 0; i < n; ++i) labels.push_back("class " + std::to_string(i));
  }
  const auto resp = orch::compose_response(c.query, out.result, labels, chat ? &*chat : nullptr);
  if (resp.fallback) std::fprintf(stderr, "warning: %s\n", resp.warning.c_str());
  std::printf("%s\n", resp.text.c_str());
  std::printf("logits written to %s\n", c.out.c_str());
  std::printf("communication (user links):\n");
  print_link("model", out.model_link);
  print_link("cloud", out.cloud_link);
  if (out.model_report.contains("bytes_sent")) {
    const double mb = (out.model_report["bytes_sent"].get<double>() + out.model_report["bytes_received"].get<double>()) / 1e6;
    std::printf("secure inference between servers: %.3f MB, %.3f s, %llu rounds\n", mb,
                out.model_report.value("seconds", 0.0),
                static_cast<unsigned long long>(out.model_report.value("rounds", 0)));
  }
  std::printf("end-to-end: %.3f s\n", out.seconds);
  return 0;
}

int run_bench(const RunConfig& c) {
  const std::uint64_t seed = c.seed.value_or(1);
  runtime::SessionOptions opts;
  opts.trunc = c.trunc;
  opts.ot = c.ot;
  std::vector<runtime::SessionReport> reports;
  std::vector<BenchRun> runs;
  for (const auto& name : c.models) {
    const auto m = load_bench_model(name, seed);
    const std::size_t batch = c.batch ? c.batch : default_batch(m.name);
    spdlog::info("bench model={} batch={}", m.name, batch);
    runs.push_back(bench_model(m, batch, opts, seed));
    reports.push_back(runs.back().report);
  }
  std::printf("%s", runtime::emit_table(reports).c_str());
  auto doc = runtime::emit_json(reports);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    doc["rows"][i]["socket_bytes"] = runs[i].socket_bytes;
    doc["rows"][i]["accounting_consistent"] =
        runs[i].socket_bytes == runs[i].report.stats.total_sent + runs[i].report.stats.total_received;
    doc["rows"][i]["matches_plaintext"] = runs[i].matches_plaintext;
    doc["rows"][i]["ot"] = runtime::ot_name(c.ot);
    doc["rows"][i]["trunc"] = runtime::trunc_name(c.trunc);
  }
  const auto problems = runtime::validate_bench_json(doc);
  for (const auto& p : problems) std::fprintf(stderr, "bench schema: %s\n", p.c_str());
  if (!c.json.empty()) std::ofstream(c.json) << doc.dump(2) << "\n";
  if (!problems.empty()) fail(ErrorCode::kInternal, "bench output failed its own schema");
  for (const auto& r : runs) {
    if (!r.matches_plaintext) fail(ErrorCode::kInternal, "secure result differs from plaintext for " + r.report.model);
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, const EnvLookup& env) {
  try {
    const RunConfig c = resolve_config(args, env);
    switch (c.role) {
      case Role::kModelServer: {
        auto m = model::load_model_file(c.model);
        orch::ModelServer d(std::move(m), server_config(c), net::Endpoint::parse(c.peer),
                            net::load_public_key(c.peer_key));
        return serve(d, c);
      }
      case Role::kCloudServer: {
        std::optional<net::Key32> pin;
        if (!c.peer_key.empty()) pin = net::load_public_key(c.peer_key);
        orch::CloudServer d(server_config(c), pin);
        return serve(d, c);
      }
      case Role::kUser:
        return run_user(c);
      case Role::kBench:
        return run_bench(c);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "pinfer: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pinfer: unexpected failure: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace pinfer::cli
