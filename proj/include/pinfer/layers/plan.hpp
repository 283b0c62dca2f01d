#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pinfer/he/bfv.hpp"
#include "pinfer/model/model.hpp"

namespace pinfer::layers {

// Coefficient `coef` of a tile polynomial carries element `index` of the
// (padded) input or of the output.
struct Slot {
  std::uint32_t coef;
  std::uint32_t index;
};

// Tiling of one linear layer into ciphertext products. Both parties build
// the same geometry; only the owner fills in the weight plaintexts.
struct LinearPlan {
  std::size_t in_size = 0;   // elements per sample, after padding
  std::size_t out_size = 0;  // elements per sample
  std::vector<std::vector<Slot>> in_tiles;
  std::vector<std::vector<Slot>> out_tiles;
  // Input tile feeding output tile, one plaintext product each.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> links;
  std::vector<he::PackedPlaintext> weights;  // parallel to links; owner only

  std::size_t products() const { return links.size(); }
};

struct ConvTiling {
  std::size_t channels = 0;      // input channels per tile
  std::size_t out_channels = 0;  // output channels per tile
  std::size_t rows = 0;          // input rows per spatial tile
  std::size_t cols = 0;          // input columns per spatial tile
};

// Chooses the tiling with the fewest products, then the fewest ciphertexts.
ConvTiling choose_conv_tiling(std::size_t C, std::size_t H, std::size_t W, std::size_t M, std::size_t kh,
                              std::size_t kw, std::size_t degree, bool diagonal);

// y = W x for W of shape out x in.
LinearPlan plan_fc(std::size_t in, std::size_t out, std::size_t degree, std::span<const std::uint64_t> weights = {});

// Cross-correlation of a padded C x H x W input with M kernels; stride is
// applied when reading results.
LinearPlan plan_conv(std::size_t C, std::size_t H, std::size_t W, std::size_t M, std::size_t kh, std::size_t kw,
                     std::size_t stride, std::size_t degree, std::span<const std::uint64_t> weights = {});

// Per-channel scaling as a block-diagonal 1x1 convolution.
LinearPlan plan_batchnorm(const Shape& shape, std::size_t degree, std::span<const std::uint64_t> scale = {});

// Plan for a model layer. The weights are packed only when `with_weights`.
LinearPlan plan_layer(const model::LayerSpec& l, const Shape& in_shape, std::size_t degree, bool with_weights);

}  // namespace pinfer::layers
