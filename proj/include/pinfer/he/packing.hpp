#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pinfer/he/bfv.hpp"
#include "pinfer/ring.hpp"

namespace pinfer::he {

// Coefficient layouts under which one negacyclic product of a packed weight
// polynomial and a packed input polynomial places every output value at a
// fixed coefficient.

// y = W x with W of shape rows x cols. The input is stored reversed so that
// row i of W meets x at coefficient i*cols + cols-1.
struct MatVecLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t span() const { return rows * cols; }
  std::size_t input_slot(std::size_t j) const { return cols - 1 - j; }
  std::size_t weight_slot(std::size_t i, std::size_t j) const { return i * cols + j; }
  std::size_t result_slot(std::size_t i) const { return i * cols + cols - 1; }
  void check(std::size_t degree) const;
};

// Stride-1 valid cross-correlation of a channels x height x width input with
// out_channels kernels of size channels x kernel_h x kernel_w. Padding is
// applied to the input before packing.
struct Conv2dLayout {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;

  std::size_t out_h() const { return height - kernel_h + 1; }
  std::size_t out_w() const { return width - kernel_w + 1; }
  std::size_t block() const { return channels * height * width; }
  std::size_t span() const { return out_channels * block(); }
  std::size_t input_slot(std::size_t c, std::size_t y, std::size_t x) const {
    return (c * height + y) * width + x;
  }
  std::size_t weight_slot(std::size_t m, std::size_t c, std::size_t a, std::size_t b) const {
    return m * block() + origin() - c * height * width - a * width - b;
  }
  std::size_t result_slot(std::size_t m, std::size_t i, std::size_t j) const {
    return m * block() + origin() + i * width + j;
  }
  void check(std::size_t degree) const;

 private:
  std::size_t origin() const {
    return (channels - 1) * height * width + (kernel_h - 1) * width + (kernel_w - 1);
  }
};

// Packs x (length cols) into a plaintext of the given degree.
PackedPlaintext pack_matvec_input(std::span<const std::uint64_t> x, const MatVecLayout& layout,
                                  std::size_t degree);
// Packs W (row-major rows x cols).
PackedPlaintext pack_matvec_weights(std::span<const std::uint64_t> w, const MatVecLayout& layout,
                                    std::size_t degree);
std::vector<std::uint64_t> unpack_matvec_result(const PackedPlaintext& pt, const MatVecLayout& layout);

// x is channels x height x width, row-major.
PackedPlaintext pack_conv_input(std::span<const std::uint64_t> x, const Conv2dLayout& layout,
                                std::size_t degree);
// w is out_channels x channels x kernel_h x kernel_w, row-major.
PackedPlaintext pack_conv_kernels(std::span<const std::uint64_t> w, const Conv2dLayout& layout,
                                  std::size_t degree);
// Returns out_channels x out_h x out_w.
std::vector<std::uint64_t> unpack_conv_result(const PackedPlaintext& pt, const Conv2dLayout& layout);

// Tensor-level wrappers: the input tensor is packed with the input layout and
// the result is returned as a tensor under the same ring config.
PackedPlaintext pack_vector(const FixedTensor& v, const MatVecLayout& layout, std::size_t degree);
PackedPlaintext pack_vector(const FixedTensor& v, const Conv2dLayout& layout, std::size_t degree);
FixedTensor unpack_result(const PackedPlaintext& pt, const MatVecLayout& layout, const RingConfig& cfg);
FixedTensor unpack_result(const PackedPlaintext& pt, const Conv2dLayout& layout, const RingConfig& cfg);

}  // namespace pinfer::he
