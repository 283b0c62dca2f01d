#include "pinfer/sharing.hpp"

namespace pinfer {

SharedTensor share(const FixedTensor& x, RandomSource& randomness) {
  const RingConfig& cfg = x.config();
  std::vector<std::uint64_t> r(x.size());
  for (auto& v : r) v = randomness.next_u64() & cfg.mask();
  std::vector<std::uint64_t> s0(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s0[i] = (x[i] - r[i]) & cfg.mask();
  return SharedTensor{ArithShare(PartyId::kOwner, FixedTensor(x.shape(), std::move(s0), cfg)),
                      ArithShare(PartyId::kCloud, FixedTensor(x.shape(), std::move(r), cfg))};
}

FixedTensor reconstruct(const ArithShare& a, const ArithShare& b) {
  require_same_config(a.config(), b.config());
  require_same_shape(a.shape(), b.shape());
  if (a.party() == b.party()) fail(ErrorCode::kInvalidArgument, "both shares belong to one party");
  const RingConfig& cfg = a.config();
  FixedTensor out(a.shape(), cfg);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (a.values()[i] + b.values()[i]) & cfg.mask();
  }
  return out;
}

FixedTensor reconstruct(const SharedTensor& s) { return reconstruct(s.share0, s.share1); }

namespace {
void check_pair(const ArithShare& a, const ArithShare& b) {
  if (a.party() != b.party()) fail(ErrorCode::kInvalidArgument, "party mismatch");
  require_same_config(a.config(), b.config());
  require_same_shape(a.shape(), b.shape());
}
}  // namespace

ArithShare add_shares(const ArithShare& a, const ArithShare& b) {
  check_pair(a, b);
  FixedTensor out = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (out[i] + b.values()[i]) & a.config().mask();
  }
  return ArithShare(a.party(), std::move(out));
}

ArithShare sub_shares(const ArithShare& a, const ArithShare& b) {
  check_pair(a, b);
  FixedTensor out = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (out[i] - b.values()[i]) & a.config().mask();
  }
  return ArithShare(a.party(), std::move(out));
}

ArithShare add_public(const ArithShare& a, const FixedTensor& c) {
  require_same_config(a.config(), c.config());
  require_same_shape(a.shape(), c.shape());
  if (a.party() != PartyId::kOwner) return a;
  FixedTensor out = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] + c[i]) & a.config().mask();
  return ArithShare(a.party(), std::move(out));
}

ArithShare mul_public(const ArithShare& a, const FixedTensor& c) {
  require_same_config(a.config(), c.config());
  require_same_shape(a.shape(), c.shape());
  FixedTensor out = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] * c[i]) & a.config().mask();
  return ArithShare(a.party(), std::move(out));
}

Bytes serialize_tensor(const FixedTensor& t) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(t.shape().size()));
  for (auto d : t.shape()) w.u64(d);
  w.u8(static_cast<std::uint8_t>(t.config().bits));
  w.u8(static_cast<std::uint8_t>(t.config().frac));
  w.words(t.data());
  return std::move(w).take();
}

FixedTensor deserialize_tensor(ByteReader& r) {
  std::uint32_t rank = r.u32();
  if (rank > 8) fail(ErrorCode::kDecode, "tensor rank too large");
  Shape shape(rank);
  for (auto& d : shape) d = r.u64();
  unsigned bits = r.u8();
  unsigned frac = r.u8();
  RingConfig cfg = RingConfig::make(bits, frac);
  auto words = r.words();
  return FixedTensor(std::move(shape), std::move(words), cfg);
}

FixedTensor deserialize_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto t = deserialize_tensor(r);
  r.expect_end();
  return t;
}

Bytes serialize_share(const ArithShare& s) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(s.party()));
  w.raw(serialize_tensor(s.values()));
  return std::move(w).take();
}

ArithShare deserialize_share(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::uint8_t party = r.u8();
  if (party > 1) fail(ErrorCode::kDecode, "invalid party id");
  auto t = deserialize_tensor(r);
  r.expect_end();
  return ArithShare(static_cast<PartyId>(party), std::move(t));
}

}  // namespace pinfer
