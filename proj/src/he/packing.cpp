#include "pinfer/he/packing.hpp"

#include <algorithm>
#include <string>

#include "pinfer/common/error.hpp"

namespace pinfer::he {

void MatVecLayout::check(std::size_t degree) const {
  if (rows == 0 || cols == 0) fail(ErrorCode::kPackingGeometry, "empty matrix");
  if (span() > degree) {
    fail(ErrorCode::kPackingGeometry, std::to_string(rows) + "x" + std::to_string(cols) +
                                          " matrix exceeds " + std::to_string(degree) + " coefficients");
  }
}

void Conv2dLayout::check(std::size_t degree) const {
  if (channels == 0 || height == 0 || width == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0) {
    fail(ErrorCode::kPackingGeometry, "empty convolution geometry");
  }
  if (kernel_h > height || kernel_w > width) fail(ErrorCode::kPackingGeometry, "kernel larger than input");
  if (span() > degree) {
    fail(ErrorCode::kPackingGeometry, "convolution needs " + std::to_string(span()) + " coefficients, " +
                                          std::to_string(degree) + " available");
  }
}

PackedPlaintext pack_matvec_input(std::span<const std::uint64_t> x, const MatVecLayout& layout,
                                  std::size_t degree) {
  layout.check(degree);
  if (x.size() != layout.cols) fail(ErrorCode::kShapeMismatch, "input length differs from matrix columns");
  PackedPlaintext pt{std::vector<std::uint64_t>(degree, 0)};
  for (std::size_t j = 0; j < layout.cols; ++j) pt.coeffs[layout.input_slot(j)] = x[j];
  return pt;
}

PackedPlaintext pack_matvec_weights(std::span<const std::uint64_t> w, const MatVecLayout& layout,
                                    std::size_t degree) {
  layout.check(degree);
  if (w.size() != layout.span()) fail(ErrorCode::kShapeMismatch, "weight count differs from matrix shape");
  PackedPlaintext pt{std::vector<std::uint64_t>(degree, 0)};
  for (std::size_t i = 0; i < layout.rows; ++i) {
    for (std::size_t j = 0; j < layout.cols; ++j) pt.coeffs[layout.weight_slot(i, j)] = w[i * layout.cols + j];
  }
  return pt;
}

std::vector<std::uint64_t> unpack_matvec_result(const PackedPlaintext& pt, const MatVecLayout& layout) {
  layout.check(pt.coeffs.size());
  std::vector<std::uint64_t> y(layout.rows);
  for (std::size_t i = 0; i < layout.rows; ++i) y[i] = pt.coeffs[layout.result_slot(i)];
  return y;
}

PackedPlaintext pack_conv_input(std::span<const std::uint64_t> x, const Conv2dLayout& layout,
                                std::size_t degree) {
  layout.check(degree);
  if (x.size() != layout.block()) fail(ErrorCode::kShapeMismatch, "input size differs from conv geometry");
  PackedPlaintext pt{std::vector<std::uint64_t>(degree, 0)};
  std::copy(x.begin(), x.end(), pt.coeffs.begin());
  return pt;
}

PackedPlaintext pack_conv_kernels(std::span<const std::uint64_t> w, const Conv2dLayout& layout,
                                  std::size_t degree) {
  layout.check(degree);
  const std::size_t kc = layout.channels, kh = layout.kernel_h, kw = layout.kernel_w;
  if (w.size() != layout.out_channels * kc * kh * kw) {
    fail(ErrorCode::kShapeMismatch, "kernel size differs from conv geometry");
  }
  PackedPlaintext pt{std::vector<std::uint64_t>(degree, 0)};
  std::size_t idx = 0;
  for (std::size_t m = 0; m < layout.out_channels; ++m) {
    for (std::size_t c = 0; c < kc; ++c) {
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) pt.coeffs[layout.weight_slot(m, c, a, b)] = w[idx++];
      }
    }
  }
  return pt;
}

std::vector<std::uint64_t> unpack_conv_result(const PackedPlaintext& pt, const Conv2dLayout& layout) {
  layout.check(pt.coeffs.size());
  const std::size_t oh = layout.out_h(), ow = layout.out_w();
  std::vector<std::uint64_t> y;
  y.reserve(layout.out_channels * oh * ow);
  for (std::size_t m = 0; m < layout.out_channels; ++m) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) y.push_back(pt.coeffs[layout.result_slot(m, i, j)]);
    }
  }
  return y;
}

PackedPlaintext pack_vector(const FixedTensor& v, const MatVecLayout& layout, std::size_t degree) {
  return pack_matvec_input(v.data(), layout, degree);
}

PackedPlaintext pack_vector(const FixedTensor& v, const Conv2dLayout& layout, std::size_t degree) {
  return pack_conv_input(v.data(), layout, degree);
}

FixedTensor unpack_result(const PackedPlaintext& pt, const MatVecLayout& layout, const RingConfig& cfg) {
  FixedTensor out({layout.rows}, cfg);
  auto y = unpack_matvec_result(pt, layout);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = cfg.reduce(y[i]);
  return out;
}

FixedTensor unpack_result(const PackedPlaintext& pt, const Conv2dLayout& layout, const RingConfig& cfg) {
  FixedTensor out({layout.out_channels, layout.out_h(), layout.out_w()}, cfg);
  auto y = unpack_conv_result(pt, layout);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = cfg.reduce(y[i]);
  return out;
}

}  // namespace pinfer::he
