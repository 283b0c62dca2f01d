#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pinfer/runtime/runtime.hpp"

namespace pinfer::runtime {

namespace {

using model::LayerKind;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t batch_of(const model::ModelSpec& m, const Shape& x) {
  if (x == m.input_shape) return 1;
  if (x.size() == m.input_shape.size() + 1 && Shape(x.begin() + 1, x.end()) == m.input_shape) return x[0];
  fail(ErrorCode::kShapeMismatch, "share shape " + shape_string(x) + " does not match model input " +
                                      shape_string(m.input_shape));
}

}  // namespace

const char* trunc_name(gadgets::TruncMode m) { return m == gadgets::TruncMode::kFaithful ? "faithful" : "local"; }

gadgets::TruncMode parse_trunc(const std::string& s) {
  if (s == "faithful") return gadgets::TruncMode::kFaithful;
  if (s == "local") return gadgets::TruncMode::kLocal;
  fail(ErrorCode::kUsage, "unknown truncation mode '" + s + "'");
}

const char* ot_name(OtBackend b) { return b == OtBackend::kReal ? "real" : "dealer"; }

OtBackend parse_ot(const std::string& s) {
  if (s == "real") return OtBackend::kReal;
  if (s == "dealer") return OtBackend::kDealer;
  fail(ErrorCode::kUsage, "unknown OT backend '" + s + "'");
}

ArithShare run_secure_inference(layers::LayerContext& ctx, const model::ModelSpec& m, const ArithShare& x) {
  require_same_config(x.config(), m.ring);
  require_same_config(ctx.ring, m.ring);
  const auto shapes = model::layer_shapes(m, ctx.owner());
  const std::size_t batch = batch_of(m, x.shape());

  std::vector<bool> keep(m.layers.size(), false);
  for (const auto& l : m.layers)
    if (l.kind == LayerKind::kAddSkip && l.skip_from >= 0) keep[static_cast<std::size_t>(l.skip_from)] = true;
  std::vector<std::vector<std::uint64_t>> saved(m.layers.size());

  std::vector<std::uint64_t> cur = x.values().words();
  Shape shape = m.input_shape;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    const auto idx = static_cast<std::uint32_t>(i);
    const std::string label = "L" + std::to_string(i) + ":" + model::kind_name(l.kind);
    ctx.ch.set_label(label);
    const auto t0 = Clock::now();
    switch (l.kind) {
      case LayerKind::kFc:
        cur = layers::fc_forward(ctx, l, layers::prepare_linear(ctx, l, shape), idx, cur, batch);
        break;
      case LayerKind::kConv2d:
        cur = layers::conv2d_forward(ctx, l, layers::prepare_linear(ctx, l, shape), idx, shape, cur, batch);
        break;
      case LayerKind::kBatchNorm:
        cur = layers::batchnorm_forward(ctx, l, layers::prepare_linear(ctx, l, shape), idx, shape, cur, batch);
        break;
      case LayerKind::kRelu:
        cur = layers::relu_forward(ctx, idx, cur);
        break;
      case LayerKind::kAvgPool:
        cur = layers::avgpool_forward(ctx, l, idx, shape, cur, batch);
        break;
      case LayerKind::kAddSkip:
        cur = layers::add_skip_forward(
            ctx, cur, l.skip_from < 0 ? x.values().words() : saved[static_cast<std::size_t>(l.skip_from)]);
        break;
    }
    ctx.ch.stats().add_phase(label, since(t0));
    shape = shapes[i];
    if (keep[i]) saved[i] = cur;
  }
  Shape out = shape;
  if (x.shape() != m.input_shape) out.insert(out.begin(), batch);
  return ArithShare(x.party(), FixedTensor(out, std::move(cur), m.ring));
}

namespace {

std::unique_ptr<ot::OtEngine> make_engine(net::Channel& ch, const SessionOptions& opts, bool owner, Prng& rng) {
  if (opts.ot == OtBackend::kDealer) return std::make_unique<ot::DealerEngine>(opts.dealer_seed, owner);
  return std::make_unique<ot::IknpEngine>(ch, rng.fork_seed(owner ? "iknp/owner" : "iknp/cloud"));
}

nlohmann::json he_json(const he::HEParams& p) {
  return {{"degree", p.poly_degree}, {"plain_bits", p.plain_bits}, {"limbs", p.limb_bits}};
}

PeerResult run_party(net::Channel& peer, const model::ModelSpec& m, const ArithShare& x, const SessionOptions& opts,
                     Prng& rng, he::ContextPtr he, he::PublicKey pk, std::optional<he::SecretKey> sk,
                     Clock::time_point t0) {
  const bool owner = x.party() == PartyId::kOwner;
  Prng gadget_rng(rng.fork_seed("gadgets"));
  Prng layer_rng(rng.fork_seed("layers"));
  auto engine = make_engine(peer, opts, owner, rng);
  gadgets::Session gs(x.party(), peer, *engine, gadget_rng);
  layers::LayerContext ctx{x.party(), peer, gs, he, std::move(pk), std::move(sk), layer_rng, m.ring, opts.trunc,
                           opts.gadget_batch};
  PeerResult out;
  out.share = run_secure_inference(ctx, m, x);
  const std::size_t batch = x.shape() == m.input_shape ? 1 : x.shape()[0];
  out.report = report_stats(m.name, batch, since(t0), peer);
  return out;
}

}  // namespace

namespace {

PeerResult owner_session(net::Channel& peer, const model::ModelSpec& m, const ArithShare& x0,
                         const SessionOptions& opts, Prng& rng);
PeerResult cloud_session(net::Channel& peer, const ArithShare& x1, const SessionOptions& opts, Prng& rng);

template <class F>
PeerResult abort_on_error(net::Channel& peer, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    peer.abort(e.what());
    throw;
  }
}

}  // namespace

PeerResult run_owner_session(net::Channel& peer, const model::ModelSpec& m, const ArithShare& x0,
                             const SessionOptions& opts, Prng& rng) {
  return abort_on_error(peer, [&] { return owner_session(peer, m, x0, opts, rng); });
}

PeerResult run_cloud_session(net::Channel& peer, const ArithShare& x1, const SessionOptions& opts, Prng& rng) {
  return abort_on_error(peer, [&] { return cloud_session(peer, x1, opts, rng); });
}

namespace {

PeerResult owner_session(net::Channel& peer, const model::ModelSpec& m, const ArithShare& x0,
                         const SessionOptions& opts, Prng& rng) {
  const auto t0 = Clock::now();
  if (x0.party() != PartyId::kOwner) fail(ErrorCode::kInvalidArgument, "owner session needs the owner's share");
  model::layer_shapes(m);
  const std::size_t batch = batch_of(m, x0.shape());
  peer.set_label("setup");
  nlohmann::json setup = {{"type", "setup"},
                          {"architecture", model::architecture_json(m)},
                          {"batch", batch},
                          {"batched", x0.shape() != m.input_shape},
                          {"trunc", trunc_name(opts.trunc)},
                          {"ot", ot_name(opts.ot)},
                          {"he", he_json(opts.he_params)}};
  const std::string text = setup.dump();
  peer.send(net::MsgTag::kControl, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  auto he = he::HEContext::create(opts.he_params);
  const Bytes pk_bytes = peer.recv(net::MsgTag::kControl);
  auto pk = he::deserialize_public_key(*he, pk_bytes);
  return run_party(peer, m, x0, opts, rng, he, std::move(pk), std::nullopt, t0);
}

PeerResult cloud_session(net::Channel& peer, const ArithShare& x1, const SessionOptions& opts, Prng& rng) {
  const auto t0 = Clock::now();
  if (x1.party() != PartyId::kCloud) fail(ErrorCode::kInvalidArgument, "cloud session needs the cloud's share");
  peer.set_label("setup");
  const Bytes msg = peer.recv(net::MsgTag::kControl);
  model::ModelSpec m;
  std::size_t batch = 0;
  bool batched = false;
  try {
    const auto j = nlohmann::json::parse(msg.begin(), msg.end());
    if (j.at("type") != "setup") fail(ErrorCode::kProtocolDesync, "expected session setup");
    m = model::architecture_only(model::architecture_from_json(j.at("architecture")));
    batch = j.at("batch").get<std::size_t>();
    batched = j.at("batched").get<bool>();
    if (j.at("trunc").get<std::string>() != trunc_name(opts.trunc) || j.at("ot").get<std::string>() != ot_name(opts.ot) ||
        j.at("he") != he_json(opts.he_params))
      fail(ErrorCode::kConfigMismatch, "peer session options differ from the local configuration");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("bad setup message: ") + e.what());
  }
  model::layer_shapes(m, false);
  Shape expect = m.input_shape;
  if (batched) expect.insert(expect.begin(), batch);
  if (x1.shape() != expect)
    fail(ErrorCode::kShapeMismatch, "cloud share " + shape_string(x1.shape()) + " does not match " + shape_string(expect));
  auto he = he::HEContext::create(opts.he_params);
  Prng key_rng(rng.fork_seed("he/keygen"));
  auto keys = he::keygen(*he, key_rng);
  peer.send(net::MsgTag::kControl, he::serialize_public_key(keys.pk));
  return run_party(peer, m, x1, opts, rng, he, keys.pk, keys.sk, t0);
}

}  // namespace

std::optional<PaperFigures> paper_reference(const std::string& model) {
  if (model == "mlp") return PaperFigures{0.005, 0.296};
  if (model == "lenet5") return PaperFigures{0.012, 1.028};
  if (model == "alexnet") return PaperFigures{4.472, 242.219};
  if (model == "resnet18") return PaperFigures{22.982, 1653.534};
  if (model == "resnet34") return PaperFigures{38.414, 2748.205};
  if (model == "resnet50") return PaperFigures{121.952, 8076.670};
  return std::nullopt;
}

SessionReport report_stats(const std::string& model, std::size_t batch, double seconds, const net::Channel& ch) {
  return SessionReport{model, batch, seconds, ch.stats()};
}

nlohmann::json emit_json(const std::vector<SessionReport>& sessions) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : sessions) {
    const double b = static_cast<double>(std::max<std::size_t>(s.batch, 1));
    nlohmann::json row = {{"model", s.model},
                          {"batch", s.batch},
                          {"runtime_s", s.seconds / b},
                          {"communication_mb", s.stats.total_mb() / b},
                          {"total_runtime_s", s.seconds},
                          {"total_communication_mb", s.stats.total_mb()},
                          {"rounds", s.stats.rounds}};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& label : s.stats.order) {
      const auto& l = s.stats.labels.at(label);
      layers.push_back({{"label", label}, {"bytes_sent", l.bytes_sent}, {"bytes_received", l.bytes_received}});
    }
    row["layers"] = std::move(layers);
    if (auto ref = paper_reference(s.model)) {
      row["paper_runtime_s"] = ref->seconds;
      row["paper_communication_mb"] = ref->megabytes;
      row["communication_ratio"] = (s.stats.total_mb() / b) / ref->megabytes;
    }
    rows.push_back(std::move(row));
  }
  return {{"schema", "pinfer-bench/1"}, {"rows", std::move(rows)}};
}

std::vector<std::string> validate_bench_json(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  if (!doc.is_object() || doc.value("schema", "") != "pinfer-bench/1") problems.push_back("missing or wrong schema tag");
  if (!doc.contains("rows") || !doc["rows"].is_array()) {
    problems.push_back("rows must be an array");
    return problems;
  }
  for (std::size_t i = 0; i < doc["rows"].size(); ++i) {
    const auto& r = doc["rows"][i];
    const std::string at = "row " + std::to_string(i) + ": ";
    if (!r.is_object()) {
      problems.push_back(at + "not an object");
      continue;
    }
    if (!r.contains("model") || !r["model"].is_string()) problems.push_back(at + "model must be a string");
    if (!r.contains("batch") || !r["batch"].is_number_unsigned()) problems.push_back(at + "batch must be unsigned");
    for (const char* k : {"runtime_s", "communication_mb", "total_runtime_s", "total_communication_mb"})
      if (!r.contains(k) || !r[k].is_number() || r[k].get<double>() < 0) problems.push_back(at + k + " must be >= 0");
    if (!r.contains("layers") || !r["layers"].is_array()) problems.push_back(at + "layers must be an array");
    const bool has_ref = r.contains("paper_communication_mb");
    if (has_ref != r.contains("communication_ratio")) problems.push_back(at + "ratio and reference must appear together");
    if (r.contains("batch") && r["batch"].is_number_unsigned() && r["batch"].get<std::size_t>() > 0 &&
        r.contains("communication_mb") && r.contains("total_communication_mb") && r["communication_mb"].is_number() &&
        r["total_communication_mb"].is_number()) {
      const double per = r["total_communication_mb"].get<double>() / static_cast<double>(r["batch"].get<std::size_t>());
      if (std::abs(per - r["communication_mb"].get<double>()) > 1e-9 * std::max(1.0, per))
        problems.push_back(at + "per-sample communication is not total / batch");
    }
  }
  return problems;
}

std::string emit_table(const std::vector<SessionReport>& sessions) {
  if (sessions.empty()) return "";
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %6s %12s %12s %12s %12s %10s\n", "model", "batch", "runtime(s)",
                "comm(MB)", "paper(s)", "paper(MB)", "ratio");
  os << line;
  for (const auto& s : sessions) {
    const double b = static_cast<double>(std::max<std::size_t>(s.batch, 1));
    const auto ref = paper_reference(s.model);
    const double mb = s.stats.total_mb() / b;
    if (ref)
      std::snprintf(line, sizeof line, "%-10s %6zu %12.4f %12.3f %12.3f %12.3f %10.2f\n", s.model.c_str(), s.batch,
                    s.seconds / b, mb, ref->seconds, ref->megabytes, mb / ref->megabytes);
    else
      std::snprintf(line, sizeof line, "%-10s %6zu %12.4f %12.3f %12s %12s %10s\n", s.model.c_str(), s.batch,
                    s.seconds / b, mb, "-", "-", "-");
    os << line;
  }
  return os.str();
}

}  // namespace pinfer::runtime
