#include "pinfer/ring.hpp"

#include <cmath>
#include <sstream>

namespace pinfer {

RingConfig RingConfig::make(unsigned bits, unsigned frac) {
  if (!(2 <= frac && frac < bits && bits <= 64)) {
    fail(ErrorCode::kInvalidArgument, "ring config requires 2 <= frac < bits <= 64, got bits=" +
                                          std::to_string(bits) + " frac=" + std::to_string(frac));
  }
  return RingConfig{bits, frac};
}

std::uint64_t ring_floor_div(std::uint64_t v, std::uint64_t d, const RingConfig& cfg) {
  if (d == 0) fail(ErrorCode::kDivideByZero, "division by zero");
  std::int64_t s = to_signed(v, cfg);
  auto sd = static_cast<std::int64_t>(d);
  std::int64_t q = s / sd;
  if ((s % sd != 0) && (s < 0)) --q;
  return from_signed(q, cfg);
}

RingElement encode_fixed(double r, const RingConfig& cfg) {
  const double limit = std::ldexp(1.0, static_cast<int>(cfg.bits - cfg.frac - 1));
  if (!std::isfinite(r) || std::fabs(r) >= limit) {
    fail(ErrorCode::kOverflow, "value " + std::to_string(r) + " outside fixed-point range");
  }
  // std::round rounds half away from zero.
  const double scaled = std::round(std::ldexp(r, static_cast<int>(cfg.frac)));
  return RingElement{from_signed(static_cast<std::int64_t>(scaled), cfg)};
}

double decode_fixed(RingElement e, const RingConfig& cfg) {
  return std::ldexp(static_cast<double>(to_signed(e.value & cfg.mask(), cfg)),
                    -static_cast<int>(cfg.frac));
}

namespace {
void check_operands(RingElement a, RingElement b, const RingConfig& cfg) {
  if (!cfg.contains(a.value) || !cfg.contains(b.value)) {
    fail(ErrorCode::kConfigMismatch, "operand not an element of Z_2^" + std::to_string(cfg.bits));
  }
}
}  // namespace

RingElement ring_add(RingElement a, RingElement b, const RingConfig& cfg) {
  check_operands(a, b, cfg);
  return RingElement{(a.value + b.value) & cfg.mask()};
}

RingElement ring_sub(RingElement a, RingElement b, const RingConfig& cfg) {
  check_operands(a, b, cfg);
  return RingElement{(a.value - b.value) & cfg.mask()};
}

RingElement ring_mul(RingElement a, RingElement b, const RingConfig& cfg) {
  check_operands(a, b, cfg);
  // 2^bits divides 2^64, so the wrapped 64-bit product reduces correctly.
  return RingElement{(a.value * b.value) & cfg.mask()};
}

RingElement ring_neg(RingElement a, const RingConfig& cfg) {
  check_operands(a, a, cfg);
  return RingElement{(0 - a.value) & cfg.mask()};
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

FixedTensor::FixedTensor(Shape shape, RingConfig cfg)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0), cfg_(cfg) {}

FixedTensor::FixedTensor(Shape shape, std::vector<std::uint64_t> data, RingConfig cfg)
    : shape_(std::move(shape)), data_(std::move(data)), cfg_(cfg) {
  if (data_.size() != shape_size(shape_)) {
    fail(ErrorCode::kShapeMismatch, "data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(shape_));
  }
  for (auto v : data_) {
    if (!cfg_.contains(v)) fail(ErrorCode::kConfigMismatch, "tensor element exceeds modulus");
  }
}

FixedTensor FixedTensor::from_reals(Shape shape, std::span<const double> values, RingConfig cfg) {
  FixedTensor t(std::move(shape), cfg);
  if (values.size() != t.size()) fail(ErrorCode::kShapeMismatch, "value count does not match shape");
  for (std::size_t i = 0; i < values.size(); ++i) t.data_[i] = encode_fixed(values[i], cfg).value;
  return t;
}

std::vector<double> FixedTensor::to_reals() const {
  std::vector<double> out(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) out[i] = decode_fixed(RingElement{data_[i]}, cfg_);
  return out;
}

FixedTensor FixedTensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    fail(ErrorCode::kShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " +
                                        shape_string(shape));
  }
  FixedTensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

void require_same_config(const RingConfig& a, const RingConfig& b) {
  if (!(a == b)) fail(ErrorCode::kConfigMismatch, "ring configurations differ");
}

void require_same_shape(const Shape& a, const Shape& b) {
  if (a != b) fail(ErrorCode::kShapeMismatch, shape_string(a) + " vs " + shape_string(b));
}

}  // namespace pinfer
