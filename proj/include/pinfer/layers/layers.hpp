#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pinfer/gadgets/gadgets.hpp"
#include "pinfer/he/bfv.hpp"
#include "pinfer/layers/plan.hpp"
#include "pinfer/model/model.hpp"

namespace pinfer::layers {

// One party's state for evaluating layers of a single session. The owner
// holds the weights and the cloud's public key; the cloud holds the key pair.
struct LayerContext {
  PartyId party;
  net::Channel& ch;
  gadgets::Session& gadgets;
  he::ContextPtr he;
  he::PublicKey pk;
  std::optional<he::SecretKey> sk;
  Prng& prng;
  RingConfig ring;
  gadgets::TruncMode trunc = gadgets::TruncMode::kFaithful;
  // Elements per gadget invocation.
  std::size_t gadget_batch = 8192;

  bool owner() const { return party == PartyId::kOwner; }
};

// A linear layer's tiling plus, at the owner, its weights in NTT form.
struct PreparedLinear {
  LinearPlan plan;
  std::vector<he::PlaintextNtt> weights;
  std::vector<std::vector<std::size_t>> links_by_out;
};

PreparedLinear prepare_linear(const LayerContext& ctx, const model::LayerSpec& l, const Shape& in_shape);

// Shares of W x + (b << frac) before truncation. `x` holds batch samples of
// plan.in_size elements (already padded); `local` is the owner's plaintext
// W x_0 + (b << frac) and is ignored at the cloud. `layer` tags the frames.
std::vector<std::uint64_t> linear_exchange(LayerContext& ctx, const PreparedLinear& lin, std::uint32_t layer,
                                           std::span<const std::uint64_t> x, std::size_t batch,
                                           std::span<const std::uint64_t> local);

// Layer forwards on batches of shares stored back to back. Linear layers
// include the truncation by 2^frac.
std::vector<std::uint64_t> fc_forward(LayerContext& ctx, const model::LayerSpec& l, const PreparedLinear& lin,
                                      std::uint32_t layer, std::span<const std::uint64_t> x, std::size_t batch);
std::vector<std::uint64_t> conv2d_forward(LayerContext& ctx, const model::LayerSpec& l, const PreparedLinear& lin,
                                          std::uint32_t layer, const Shape& in_shape,
                                          std::span<const std::uint64_t> x, std::size_t batch);
std::vector<std::uint64_t> batchnorm_forward(LayerContext& ctx, const model::LayerSpec& l, const PreparedLinear& lin,
                                             std::uint32_t layer, const Shape& in_shape,
                                             std::span<const std::uint64_t> x, std::size_t batch);
std::vector<std::uint64_t> relu_forward(LayerContext& ctx, std::uint32_t layer, std::span<const std::uint64_t> x);
std::vector<std::uint64_t> avgpool_forward(LayerContext& ctx, const model::LayerSpec& l, std::uint32_t layer,
                                           const Shape& in_shape, std::span<const std::uint64_t> x,
                                           std::size_t batch);
std::vector<std::uint64_t> add_skip_forward(const LayerContext& ctx, std::span<const std::uint64_t> x,
                                            std::span<const std::uint64_t> skip);
std::vector<std::uint64_t> truncate_shares(LayerContext& ctx, std::span<const std::uint64_t> x);

}  // namespace pinfer::layers
