#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinfer/layers/layers.hpp"
#include "pinfer/model/model.hpp"
#include "pinfer/net/channel.hpp"

namespace pinfer::runtime {

enum class OtBackend { kReal, kDealer };

const char* trunc_name(gadgets::TruncMode m);
gadgets::TruncMode parse_trunc(const std::string& s);
const char* ot_name(OtBackend b);
OtBackend parse_ot(const std::string& s);

struct SessionOptions {
  gadgets::TruncMode trunc = gadgets::TruncMode::kFaithful;
  OtBackend ot = OtBackend::kReal;
  // Shared by both servers; only read by the dealer backend.
  Seed dealer_seed{};
  std::size_t gadget_batch = 8192;
  he::HEParams he_params = he::HEParams::defaults();
};

// Drives the layers in graph order on this party's share. The owner's model
// carries weights; the cloud's is architecture only. x is [B, input...] or a
// single sample; the result follows the same convention. The channel label
// is set per layer so CommStats attributes bytes to layers.
ArithShare run_secure_inference(layers::LayerContext& ctx, const model::ModelSpec& m, const ArithShare& x);

struct SessionReport {
  std::string model;
  std::size_t batch = 0;
  double seconds = 0;
  net::CommStats stats;
};

struct PeerResult {
  ArithShare share;
  SessionReport report;
};

// Complete peer sessions over an established channel: the owner announces
// the architecture and batch, the cloud answers with a fresh HE public key,
// then both run the inference.
PeerResult run_owner_session(net::Channel& peer, const model::ModelSpec& m, const ArithShare& x0,
                             const SessionOptions& opts, Prng& rng);
PeerResult run_cloud_session(net::Channel& peer, const ArithShare& x1, const SessionOptions& opts, Prng& rng);

// Reference figures from the paper's performance table.
struct PaperFigures {
  double seconds;
  double megabytes;
};
std::optional<PaperFigures> paper_reference(const std::string& model);

SessionReport report_stats(const std::string& model, std::size_t batch, double seconds, const net::Channel& ch);
// Per-sample rows: runtime and communication divided by the batch size,
// with the paper's figures and the communication ratio when known.
std::string emit_table(const std::vector<SessionReport>& sessions);
nlohmann::json emit_json(const std::vector<SessionReport>& sessions);
// Checks a bench document against its schema; returns the problems found.
std::vector<std::string> validate_bench_json(const nlohmann::json& doc);

}  // namespace pinfer::runtime
