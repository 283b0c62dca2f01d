#include <algorithm>

#include "pinfer/common/error.hpp"
#include "pinfer/gadgets/gadgets.hpp"

namespace pinfer::gadgets {

namespace {

constexpr std::uint64_t kCmpDomain = 0x636d70;

unsigned chunk_count(unsigned bits) { return (bits + kChunkBits - 1) / kChunkBits; }
unsigned chunk_width(unsigned bits, unsigned k) { return std::min(kChunkBits, bits - k * kChunkBits); }

Block pow_double(Block b, unsigned j) {
  for (unsigned i = 0; i < j; ++i) b = gf_double(b);
  return b;
}

// Random AND triples: one random OT in each direction yields XOR shares of
// a, b and a & b without further messages.
struct BitTriples {
  std::vector<std::uint8_t> a, b, c;
};

BitTriples bit_triples(Session& s, std::size_t n) {
  std::vector<Block> k0(n), k1(n), key(n);
  std::vector<std::uint8_t> choice(n);
  BitTriples t{std::vector<std::uint8_t>(n), std::vector<std::uint8_t>(n), std::vector<std::uint8_t>(n)};
  if (s.owner()) {
    s.ot().rot_send(k0, k1);
    s.ot().rot_recv(choice, key);
  } else {
    s.ot().rot_recv(choice, key);
    s.ot().rot_send(k0, k1);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t l0 = k0[i].lo & 1, l1 = k1[i].lo & 1, lk = key[i].lo & 1;
    t.a[i] = l0 ^ l1;
    t.b[i] = choice[i] & 1;
    t.c[i] = (t.a[i] & t.b[i]) ^ l0 ^ lk;
  }
  return t;
}

}  // namespace

Bytes Session::exchange(net::MsgTag tag, std::span<const std::uint8_t> mine) {
  if (owner()) {
    ch_.send(tag, mine);
    return ch_.recv(tag);
  }
  Bytes peer = ch_.recv(tag);
  ch_.send(tag, mine);
  return peer;
}

std::vector<std::uint8_t> and_gates(Session& s, std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
  const std::size_t n = x.size();
  if (y.size() != n) fail(ErrorCode::kShapeMismatch, "AND operands differ in length");
  if (n == 0) return {};
  const BitTriples t = bit_triples(s, n);
  std::vector<std::uint8_t> open(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    open[i] = (x[i] ^ t.a[i]) & 1;
    open[n + i] = (y[i] ^ t.b[i]) & 1;
  }
  const Bytes peer = s.exchange(net::MsgTag::kCmp, pack_bits(open));
  if (peer.size() != (2 * n + 7) / 8) fail(ErrorCode::kTranscriptInvalid, "AND opening has wrong length");
  const auto theirs = unpack_bits(peer, 2 * n);
  std::vector<std::uint8_t> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t d = open[i] ^ theirs[i];
    const std::uint8_t e = open[n + i] ^ theirs[n + i];
    z[i] = t.c[i] ^ (d & t.b[i]) ^ (e & t.a[i]) ^ (s.owner() ? (d & e) : 0);
  }
  return z;
}

BoolShare compare_gt(Session& s, std::span<const std::uint64_t> mine, unsigned bits) {
  if (bits == 0 || bits > 64) fail(ErrorCode::kInvalidArgument, "comparison width out of range");
  const std::size_t n = mine.size();
  const unsigned K = chunk_count(bits);
  BoolShare out{s.party(), std::vector<std::uint8_t>(n)};
  if (n == 0) return out;

  const std::uint64_t tweak = s.take_tweaks(std::uint64_t{n} * K);
  const std::size_t R = n * bits;
  std::size_t msg_bits = 0;
  for (unsigned k = 0; k < K; ++k) msg_bits += 2u << chunk_width(bits, k);
  msg_bits *= n;

  // Leaf shares per (instance, chunk): greater-than and equality.
  std::vector<std::uint8_t> G(n * K), E(n * K);

  if (s.owner()) {
    std::vector<Block> k0(R), k1(R);
    s.ot().rot_send(k0, k1);
    const Bytes corr = s.channel().recv(net::MsgTag::kCmp);
    if (corr.size() != (R + 7) / 8) fail(ErrorCode::kTranscriptInvalid, "comparison correction has wrong length");
    const auto e = unpack_bits(corr, R);

    std::vector<std::uint8_t> msgs(msg_bits);
    std::vector<Block> pad(std::size_t{1} << kChunkBits);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (unsigned k = 0; k < K; ++k) {
        const unsigned w = chunk_width(bits, k);
        const std::size_t base = i * bits + k * kChunkBits;
        const std::uint64_t a = (mine[i] >> (k * kChunkBits)) & ((1u << w) - 1);
        const std::size_t span_n = std::size_t{1} << w;
        pad[0] = Block{tweak + i * K + k, kCmpDomain};
        std::size_t filled = 1;
        for (unsigned j = 0; j < w; ++j) {
          const Block d0 = pow_double(e[base + j] ? k1[base + j] : k0[base + j], j);
          const Block d1 = pow_double(e[base + j] ? k0[base + j] : k1[base + j], j);
          for (std::size_t u = 0; u < filled; ++u) {
            pad[u + filled] = pad[u] ^ d1;
            pad[u] ^= d0;
          }
          filled <<= 1;
        }
        s.hash().hash_in_place(std::span<Block>(pad.data(), span_n));
        const std::uint8_t g = s.prng().next_bit(), q = s.prng().next_bit();
        G[i * K + k] = g;
        E[i * K + k] = q;
        for (std::size_t u = 0; u < span_n; ++u) {
          msgs[pos++] = static_cast<std::uint8_t>(((a > u) ^ g ^ pad[u].lo) & 1);
          msgs[pos++] = static_cast<std::uint8_t>(((a == u) ^ q ^ (pad[u].lo >> 1)) & 1);
        }
      }
    }
    s.channel().send(net::MsgTag::kCmp, pack_bits(msgs));
  } else {
    std::vector<std::uint8_t> choice(R);
    std::vector<Block> key(R);
    s.ot().rot_recv(choice, key);
    std::vector<std::uint8_t> e(R);
    for (std::size_t i = 0; i < n; ++i)
      for (unsigned b = 0; b < bits; ++b) e[i * bits + b] = ((mine[i] >> b) & 1) ^ choice[i * bits + b];
    s.channel().send(net::MsgTag::kCmp, pack_bits(e));
    const Bytes reply = s.channel().recv(net::MsgTag::kCmp);
    if (reply.size() != (msg_bits + 7) / 8) fail(ErrorCode::kTranscriptInvalid, "comparison reply has wrong length");
    const auto msgs = unpack_bits(reply, msg_bits);
    std::vector<Block> pad(n * K);
    for (std::size_t i = 0; i < n; ++i) {
      for (unsigned k = 0; k < K; ++k) {
        const unsigned w = chunk_width(bits, k);
        const std::size_t base = i * bits + k * kChunkBits;
        Block x{tweak + i * K + k, kCmpDomain};
        for (unsigned j = 0; j < w; ++j) x ^= pow_double(key[base + j], j);
        pad[i * K + k] = x;
      }
    }
    s.hash().hash_in_place(pad);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (unsigned k = 0; k < K; ++k) {
        const unsigned w = chunk_width(bits, k);
        const std::uint64_t v = (mine[i] >> (k * kChunkBits)) & ((1u << w) - 1);
        const std::uint64_t p = pad[i * K + k].lo;
        G[i * K + k] = (msgs[pos + 2 * v] ^ p) & 1;
        E[i * K + k] = (msgs[pos + 2 * v + 1] ^ (p >> 1)) & 1;
        pos += 2u << w;
      }
    }
  }

  // Combine adjacent chunks from the low end: G = G_hi ^ (E_hi & G_lo) and
  // E = E_hi & E_lo. The node holding chunk 0 never needs its E.
  unsigned width = K;
  while (width > 1) {
    const unsigned pairs = width / 2;
    std::vector<std::uint8_t> lhs, rhs;
    lhs.reserve(n * (2 * pairs - 1));
    rhs.reserve(n * (2 * pairs - 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (unsigned p = 0; p < pairs; ++p) {
        const std::size_t lo = i * K + 2 * p, hi = lo + 1;
        lhs.push_back(E[hi]);
        rhs.push_back(G[lo]);
        if (p > 0) {
          lhs.push_back(E[hi]);
          rhs.push_back(E[lo]);
        }
      }
    }
    const auto z = and_gates(s, lhs, rhs);
    std::size_t zi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (unsigned p = 0; p < pairs; ++p) {
        const std::size_t lo = i * K + 2 * p, hi = lo + 1, dst = i * K + p;
        const std::uint8_t g = G[hi] ^ z[zi++];
        const std::uint8_t eq = p > 0 ? z[zi++] : 0;
        G[dst] = g;
        E[dst] = eq;
      }
      if (width % 2) {
        G[i * K + pairs] = G[i * K + width - 1];
        E[i * K + pairs] = E[i * K + width - 1];
      }
    }
    width = pairs + width % 2;
  }
  for (std::size_t i = 0; i < n; ++i) out.bits[i] = G[i * K];
  return out;
}

BoolShare positive(Session& s, std::span<const std::uint64_t> x, unsigned bits) {
  if (bits < 2 || bits > 64) fail(ErrorCode::kInvalidArgument, "ring width out of range");
  const std::uint64_t low = (std::uint64_t{1} << (bits - 1)) - 1;
  std::vector<std::uint64_t> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    v[i] = s.owner() ? (x[i] & low) : low - (x[i] & low);
  BoolShare carry = compare_gt(s, v, bits - 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::uint8_t msb = (x[i] >> (bits - 1)) & 1;
    carry.bits[i] ^= msb ^ (s.owner() ? 1 : 0);
  }
  return carry;
}

}  // namespace pinfer::gadgets
