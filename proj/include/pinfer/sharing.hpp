#pragma once

#include <cstdint>

#include "pinfer/common/bytes.hpp"
#include "pinfer/common/prng.hpp"
#include "pinfer/ring.hpp"

namespace pinfer {

// Party 0 is the model owner and party 1 the cloud throughout the engine.
enum class PartyId : std::uint8_t { kOwner = 0, kCloud = 1 };

inline int party_index(PartyId p) { return static_cast<int>(p); }
inline PartyId other(PartyId p) { return p == PartyId::kOwner ? PartyId::kCloud : PartyId::kOwner; }

// One party's additive share of a tensor.
class ArithShare {
 public:
  ArithShare() = default;
  ArithShare(PartyId party, FixedTensor values) : party_(party), values_(std::move(values)) {}

  PartyId party() const { return party_; }
  const FixedTensor& values() const { return values_; }
  FixedTensor& values() { return values_; }
  const RingConfig& config() const { return values_.config(); }
  const Shape& shape() const { return values_.shape(); }

  friend bool operator==(const ArithShare&, const ArithShare&) = default;

 private:
  PartyId party_ = PartyId::kOwner;
  FixedTensor values_;
};

struct SharedTensor {
  ArithShare share0;
  ArithShare share1;
};

// share1 is uniform over the ring; share0 = x - share1.
SharedTensor share(const FixedTensor& x, RandomSource& randomness);
FixedTensor reconstruct(const SharedTensor& s);
FixedTensor reconstruct(const ArithShare& a, const ArithShare& b);

ArithShare add_shares(const ArithShare& a, const ArithShare& b);
ArithShare sub_shares(const ArithShare& a, const ArithShare& b);
// Public constants enter through party 0 only.
ArithShare add_public(const ArithShare& a, const FixedTensor& c);
// Elementwise product with a public tensor. A fixed-point scaled c leaves
// the result at double scale; the caller truncates.
ArithShare mul_public(const ArithShare& a, const FixedTensor& c);

// Shape header (u32 rank, u64 dims), ring config, then length-prefixed
// little-endian words.
Bytes serialize_share(const ArithShare& s);
ArithShare deserialize_share(std::span<const std::uint8_t> bytes);
Bytes serialize_tensor(const FixedTensor& t);
FixedTensor deserialize_tensor(ByteReader& reader);
FixedTensor deserialize_tensor(std::span<const std::uint8_t> bytes);

}  // namespace pinfer
