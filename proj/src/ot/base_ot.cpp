#include <sodium.h>

#include "pinfer/common/error.hpp"
#include "pinfer/ot/ot.hpp"

namespace pinfer::ot {

namespace {

using Point = std::array<std::uint8_t, crypto_core_ristretto255_BYTES>;
using Scalar = std::array<std::uint8_t, crypto_core_ristretto255_SCALARBYTES>;

Scalar random_scalar(RandomSource& rng) {
  std::uint8_t wide[crypto_core_ristretto255_NONREDUCEDSCALARBYTES];
  rng.fill(wide);
  Scalar s;
  crypto_core_ristretto255_scalar_reduce(s.data(), wide);
  return s;
}

Point base_mult(const Scalar& s) {
  Point p;
  if (crypto_scalarmult_ristretto255_base(p.data(), s.data()) != 0) fail(ErrorCode::kEntropyFailure, "zero scalar");
  return p;
}

Point mult(const Scalar& s, const Point& p) {
  Point out;
  if (crypto_scalarmult_ristretto255(out.data(), s.data(), p.data()) != 0) {
    fail(ErrorCode::kTranscriptInvalid, "OT point multiplies to the identity");
  }
  return out;
}

Point read_point(ByteReader& r) {
  Point p;
  auto raw = r.raw(p.size());
  std::copy(raw.begin(), raw.end(), p.begin());
  if (!crypto_core_ristretto255_is_valid_point(p.data())) {
    fail(ErrorCode::kTranscriptInvalid, "OT transcript carries an invalid group element");
  }
  return p;
}

Block key_hash(const Point& a, const Point& b, const Point& shared, std::uint64_t index) {
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, 16);
  crypto_generichash_update(&st, a.data(), a.size());
  crypto_generichash_update(&st, b.data(), b.size());
  crypto_generichash_update(&st, shared.data(), shared.size());
  std::uint8_t idx[8];
  for (int i = 0; i < 8; ++i) idx[i] = static_cast<std::uint8_t>(index >> (8 * i));
  crypto_generichash_update(&st, idx, sizeof idx);
  Block out;
  crypto_generichash_final(&st, reinterpret_cast<std::uint8_t*>(&out), 16);
  return out;
}

}  // namespace

void base_rot_send(net::Channel& ch, std::span<Block> k0, std::span<Block> k1, RandomSource& rng) {
  const std::size_t n = k0.size();
  if (k1.size() != n) fail(ErrorCode::kInvalidArgument, "key spans differ in length");
  const Scalar a = random_scalar(rng);
  const Point big_a = base_mult(a);
  ch.send(net::MsgTag::kOtSetup, big_a);

  Bytes reply = ch.recv(net::MsgTag::kOtSetup);
  if (reply.size() != n * 32) fail(ErrorCode::kTranscriptInvalid, "OT setup reply has wrong length");
  ByteReader r(reply);
  const Point aa = mult(a, big_a);
  for (std::size_t i = 0; i < n; ++i) {
    const Point b = read_point(r);
    const Point p0 = mult(a, b);
    Point p1;
    crypto_core_ristretto255_sub(p1.data(), p0.data(), aa.data());
    k0[i] = key_hash(big_a, b, p0, i);
    k1[i] = key_hash(big_a, b, p1, i);
  }
}

void base_rot_recv(net::Channel& ch, std::span<const std::uint8_t> choice, std::span<Block> out, RandomSource& rng) {
  const std::size_t n = choice.size();
  if (out.size() != n) fail(ErrorCode::kInvalidArgument, "output span differs from choice count");
  Bytes first = ch.recv(net::MsgTag::kOtSetup);
  if (first.size() != 32) fail(ErrorCode::kTranscriptInvalid, "OT setup message has wrong length");
  ByteReader r(first);
  const Point big_a = read_point(r);

  ByteWriter w;
  std::vector<Scalar> secrets(n);
  std::vector<Point> points(n);
  for (std::size_t i = 0; i < n; ++i) {
    secrets[i] = random_scalar(rng);
    Point b = base_mult(secrets[i]);
    if (choice[i] & 1) {
      Point sum;
      crypto_core_ristretto255_add(sum.data(), b.data(), big_a.data());
      b = sum;
    }
    points[i] = b;
    w.raw(b);
  }
  ch.send(net::MsgTag::kOtSetup, w.bytes());
  for (std::size_t i = 0; i < n; ++i) out[i] = key_hash(big_a, points[i], mult(secrets[i], big_a), i);
}

void base_ot_send(net::Channel& ch, std::span<const Block> m0, std::span<const Block> m1, RandomSource& rng) {
  const std::size_t n = m0.size();
  if (m1.size() != n) fail(ErrorCode::kInvalidArgument, "message spans differ in length");
  std::vector<Block> k0(n), k1(n);
  base_rot_send(ch, k0, k1, rng);
  ByteWriter w;
  for (std::size_t i = 0; i < n; ++i) {
    const Block y0 = m0[i] ^ k0[i], y1 = m1[i] ^ k1[i];
    w.u64(y0.lo), w.u64(y0.hi), w.u64(y1.lo), w.u64(y1.hi);
  }
  ch.send(net::MsgTag::kOtCorrection, w.bytes());
}

void base_ot_recv(net::Channel& ch, std::span<const std::uint8_t> choice, std::span<Block> out, RandomSource& rng) {
  base_rot_recv(ch, choice, out, rng);
  Bytes masked = ch.recv(net::MsgTag::kOtCorrection);
  if (masked.size() != choice.size() * 32) fail(ErrorCode::kTranscriptInvalid, "OT message block has wrong length");
  ByteReader r(masked);
  for (std::size_t i = 0; i < choice.size(); ++i) {
    Block y[2];
    for (auto& b : y) b.lo = r.u64(), b.hi = r.u64();
    out[i] ^= y[choice[i] & 1];
  }
}

}  // namespace pinfer::ot
