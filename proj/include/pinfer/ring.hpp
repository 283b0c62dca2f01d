#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pinfer/common/error.hpp"

namespace pinfer {

// Ring Z_{2^bits} with a fixed-point scale of 2^frac.
struct RingConfig {
  unsigned bits = 41;
  unsigned frac = 12;

  // Validates 2 <= frac < bits <= 64.
  static RingConfig make(unsigned bits, unsigned frac);

  std::uint64_t mask() const {
    return bits == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  }
  std::uint64_t half() const { return std::uint64_t{1} << (bits - 1); }
  std::uint64_t reduce(std::uint64_t v) const { return v & mask(); }
  bool contains(std::uint64_t v) const { return (v & ~mask()) == 0; }

  friend bool operator==(const RingConfig&, const RingConfig&) = default;
};

struct RingElement {
  std::uint64_t value = 0;
  friend bool operator==(RingElement, RingElement) = default;
};

// Two's-complement interpretation of a ring value.
inline std::int64_t to_signed(std::uint64_t v, unsigned bits) {
  if (bits == 64) return static_cast<std::int64_t>(v);
  std::uint64_t sign = std::uint64_t{1} << (bits - 1);
  return (v & sign) ? static_cast<std::int64_t>(v | ~((sign << 1) - 1))
                    : static_cast<std::int64_t>(v);
}
inline std::int64_t to_signed(std::uint64_t v, const RingConfig& cfg) {
  return to_signed(v, cfg.bits);
}
inline std::uint64_t from_signed(std::int64_t v, const RingConfig& cfg) {
  return static_cast<std::uint64_t>(v) & cfg.mask();
}

// floor(signed(v) / 2^shift) re-encoded in the ring (arithmetic shift).
inline std::uint64_t ring_arith_shift(std::uint64_t v, unsigned shift, const RingConfig& cfg) {
  return from_signed(to_signed(v, cfg) >> shift, cfg);
}

// floor(signed(v) / d) re-encoded in the ring.
std::uint64_t ring_floor_div(std::uint64_t v, std::uint64_t d, const RingConfig& cfg);

RingElement encode_fixed(double r, const RingConfig& cfg);
double decode_fixed(RingElement e, const RingConfig& cfg);

RingElement ring_add(RingElement a, RingElement b, const RingConfig& cfg);
RingElement ring_sub(RingElement a, RingElement b, const RingConfig& cfg);
RingElement ring_mul(RingElement a, RingElement b, const RingConfig& cfg);
RingElement ring_neg(RingElement a, const RingConfig& cfg);

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Row-major tensor of ring elements. Elements are stored as raw words for
// throughput; every word is < 2^bits.
class FixedTensor {
 public:
  FixedTensor() = default;
  FixedTensor(Shape shape, RingConfig cfg);
  FixedTensor(Shape shape, std::vector<std::uint64_t> data, RingConfig cfg);

  static FixedTensor from_reals(Shape shape, std::span<const double> values, RingConfig cfg);
  std::vector<double> to_reals() const;

  const Shape& shape() const { return shape_; }
  const RingConfig& config() const { return cfg_; }
  std::size_t size() const { return data_.size(); }
  std::span<std::uint64_t> data() { return data_; }
  std::span<const std::uint64_t> data() const { return data_; }
  std::vector<std::uint64_t>& words() { return data_; }
  const std::vector<std::uint64_t>& words() const { return data_; }
  std::uint64_t& operator[](std::size_t i) { return data_[i]; }
  std::uint64_t operator[](std::size_t i) const { return data_[i]; }

  FixedTensor reshaped(Shape shape) const;

  friend bool operator==(const FixedTensor&, const FixedTensor&) = default;

 private:
  Shape shape_;
  std::vector<std::uint64_t> data_;
  RingConfig cfg_;
};

void require_same_config(const RingConfig& a, const RingConfig& b);
void require_same_shape(const Shape& a, const Shape& b);

}  // namespace pinfer
