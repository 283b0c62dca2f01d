#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pinfer/model/model.hpp"

namespace pinfer::model {

// Per-layer integer kernels over a batch of B samples stored back to back.
// Linear kernels return W x + (b << frac) mod 2^bits before truncation.
std::vector<std::uint64_t> fc_accumulate(const LayerSpec& l, std::span<const std::uint64_t> x, std::size_t batch,
                                         const RingConfig& cfg, bool with_bias = true);
std::vector<std::uint64_t> conv_accumulate(const LayerSpec& l, const Shape& in_shape,
                                           std::span<const std::uint64_t> x, std::size_t batch,
                                           const RingConfig& cfg, bool with_bias = true);
std::vector<std::uint64_t> batchnorm_accumulate(const LayerSpec& l, const Shape& in_shape,
                                                std::span<const std::uint64_t> x, std::size_t batch,
                                                const RingConfig& cfg, bool with_bias = true);
// Window sums of a non-overlapping pool.
std::vector<std::uint64_t> pool_sum(const LayerSpec& l, const Shape& in_shape, std::span<const std::uint64_t> x,
                                    std::size_t batch, const RingConfig& cfg);
// Zero padding of a [B, C, H, W] batch.
std::vector<std::uint64_t> pad_input(std::span<const std::uint64_t> x, std::size_t batch, const Shape& in_shape,
                                     std::size_t padding);

// Channel count a batchnorm layer sees for an input shape.
std::size_t bn_channels(const Shape& in_shape);

}  // namespace pinfer::model
