#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pinfer/common/block.hpp"
#include "pinfer/common/prng.hpp"
#include "pinfer/net/channel.hpp"
#include "pinfer/ot/ot.hpp"
#include "pinfer/sharing.hpp"

namespace pinfer::gadgets {

// XOR sharing of a bit vector.
struct BoolShare {
  PartyId party = PartyId::kOwner;
  std::vector<std::uint8_t> bits;
};

// One party's view of a gadget session: the channel to the peer, the OT
// engine bound to it and local randomness. Both parties must invoke the same
// gadgets in the same order with the same sizes.
class Session {
 public:
  Session(PartyId party, net::Channel& ch, ot::OtEngine& ot, Prng& prng)
      : party_(party), ch_(ch), ot_(ot), prng_(prng) {}

  PartyId party() const { return party_; }
  bool owner() const { return party_ == PartyId::kOwner; }
  net::Channel& channel() { return ch_; }
  ot::OtEngine& ot() { return ot_; }
  Prng& prng() { return prng_; }
  CrHash& hash() { return hash_; }
  // Fresh hash tweaks, advanced identically on both sides.
  std::uint64_t take_tweaks(std::uint64_t n) {
    const std::uint64_t t = tweak_;
    tweak_ += n;
    return t;
  }

  // Owner sends first, then receives; the cloud mirrors. Deadlock-free on
  // bounded socket buffers.
  Bytes exchange(net::MsgTag tag, std::span<const std::uint8_t> mine);

 private:
  PartyId party_;
  net::Channel& ch_;
  ot::OtEngine& ot_;
  Prng& prng_;
  CrHash hash_;
  std::uint64_t tweak_ = 0;
};

inline constexpr unsigned kChunkBits = 4;

// XOR shares of [a > b] where the owner inputs a and the cloud inputs b,
// both unsigned values of `bits` bits.
BoolShare compare_gt(Session& s, std::span<const std::uint64_t> mine, unsigned bits);

// XOR shares of [signed(x) >= 0] for an additively shared x in Z_{2^bits}.
BoolShare positive(Session& s, std::span<const std::uint64_t> x, unsigned bits);

// Boolean AND of XOR-shared bit vectors.
std::vector<std::uint8_t> and_gates(Session& s, std::span<const std::uint8_t> x, std::span<const std::uint8_t> y);

// Additive shares in Z_{2^bits} of a XOR-shared bit.
std::vector<std::uint64_t> b2a(Session& s, const BoolShare& d, unsigned bits);

// Additive shares of d ? x : 0.
std::vector<std::uint64_t> mux(Session& s, const BoolShare& d, std::span<const std::uint64_t> x, unsigned bits);

// Additive shares of floor(signed(x) / divisor), exact for every ring value.
std::vector<std::uint64_t> divide_public(Session& s, std::span<const std::uint64_t> x, std::uint64_t divisor,
                                         unsigned bits);

enum class TruncMode { kFaithful, kLocal };

// Arithmetic right shift of a shared value. Faithful mode is exact; local
// mode shifts each share independently and may be off by one unit, or badly
// wrong with probability about |x| / 2^bits.
std::vector<std::uint64_t> truncate(Session& s, std::span<const std::uint64_t> x, unsigned shift, unsigned bits,
                                    TruncMode mode);

// Beaver triple shares over Z_{2^bits}.
struct TripleBatch {
  std::vector<std::uint64_t> a, b, c;
};

enum class TripleBackend { kOtGilboa, kDealer };

// One-time triple store. Each triple is consumed exactly once.
class TriplePool {
 public:
  TriplePool() = default;
  TriplePool(TripleBatch batch, unsigned bits);
  std::size_t size() const { return t_.a.size(); }
  std::size_t remaining() const { return size() - cursor_; }
  unsigned bits() const { return bits_; }
  // Claims the next n triples; throws kTripleExhausted when short.
  std::size_t take(std::size_t n);
  // Claims one specific triple; throws kTripleReuse when already used.
  void claim(std::size_t i);
  const TripleBatch& triples() const { return t_; }

 private:
  TripleBatch t_;
  std::vector<std::uint8_t> used_;
  std::size_t cursor_ = 0;
  unsigned bits_ = 0;
};

// The dealer backend derives all triples from `dealer_seed`, which both
// parties must share (test-only).
TriplePool gen_triples(Session& s, std::size_t n, unsigned bits, TripleBackend backend,
                       const Seed& dealer_seed = Seed{});

std::vector<std::uint64_t> secure_mul(Session& s, TriplePool& pool, std::span<const std::uint64_t> x,
                                      std::span<const std::uint64_t> y);

// Tensor-level wrappers on ArithShare values.
ArithShare relu(Session& s, const ArithShare& x);
ArithShare divide_public(Session& s, const ArithShare& x, std::uint64_t divisor);
ArithShare truncate(Session& s, const ArithShare& x, unsigned shift, TruncMode mode);

}  // namespace pinfer::gadgets
