#include <algorithm>
#include <bit>

#include "pinfer/common/error.hpp"
#include "pinfer/gadgets/gadgets.hpp"

namespace pinfer::gadgets {

namespace {

std::uint64_t mask_of(unsigned bits) { return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1; }

void check_bits(unsigned bits) {
  if (bits < 2 || bits > 64) fail(ErrorCode::kInvalidArgument, "ring width out of range");
}

void check_share(const BoolShare& d, std::size_t n) {
  if (d.bits.size() != n) fail(ErrorCode::kShapeMismatch, "boolean share length mismatch");
}

// Chosen OT in the fixed order: the owner sends first.
void ot_words(Session& s, bool i_send, std::span<const std::uint64_t> m0, std::span<const std::uint64_t> m1,
              std::span<const std::uint8_t> choice, std::span<std::uint64_t> out, unsigned bits, net::MsgTag tag) {
  if (i_send)
    ot::send_words(s.channel(), s.ot(), m0, m1, bits, tag);
  else
    ot::recv_words(s.channel(), s.ot(), choice, out, bits, tag);
}

}  // namespace

std::vector<std::uint64_t> b2a(Session& s, const BoolShare& d, unsigned bits) {
  check_bits(bits);
  const std::size_t n = d.bits.size();
  const std::uint64_t mask = mask_of(bits);
  std::vector<std::uint64_t> out(n);
  if (n == 0) return out;
  if (s.owner()) {
    std::vector<std::uint64_t> m0(n), m1(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = s.prng().next_bits(bits);
      m0[i] = r[i];
      m1[i] = (r[i] + (d.bits[i] & 1)) & mask;
      out[i] = ((d.bits[i] & 1) + 2 * r[i]) & mask;
    }
    ot_words(s, true, m0, m1, {}, {}, bits, net::MsgTag::kDiv);
  } else {
    std::vector<std::uint64_t> y(n);
    ot_words(s, false, {}, {}, d.bits, y, bits, net::MsgTag::kDiv);
    for (std::size_t i = 0; i < n; ++i) out[i] = ((d.bits[i] & 1) - 2 * y[i]) & mask;
  }
  return out;
}

std::vector<std::uint64_t> mux(Session& s, const BoolShare& d, std::span<const std::uint64_t> x, unsigned bits) {
  check_bits(bits);
  const std::size_t n = x.size();
  check_share(d, n);
  const std::uint64_t mask = mask_of(bits);
  std::vector<std::uint64_t> out(n);
  if (n == 0) return out;
  std::vector<std::uint64_t> m0(n), m1(n), r(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = s.prng().next_bits(bits);
    const std::uint8_t di = d.bits[i] & 1;
    m0[i] = ((di ? x[i] : 0) - r[i]) & mask;
    m1[i] = ((di ? 0 : x[i]) - r[i]) & mask;
  }
  // Each party offers (d_mine ^ c) * x_mine - r to the peer choosing with its
  // own share bit; the owner's offer goes first.
  for (int phase = 0; phase < 2; ++phase) {
    const bool i_send = (phase == 0) == s.owner();
    ot_words(s, i_send, m0, m1, d.bits, y, bits, net::MsgTag::kMux);
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = (r[i] + y[i]) & mask;
  return out;
}

std::vector<std::uint64_t> divide_public(Session& s, std::span<const std::uint64_t> x, std::uint64_t divisor,
                                         unsigned bits) {
  check_bits(bits);
  if (divisor == 0) fail(ErrorCode::kDivideByZero, "division by zero");
  const std::size_t n = x.size();
  const std::uint64_t mask = mask_of(bits);
  std::vector<std::uint64_t> out(x.begin(), x.end());
  if (divisor == 1 || n == 0) return out;

  using u128 = unsigned __int128;
  using i128 = __int128;
  const u128 L = u128{1} << bits;
  const u128 half = L / 2;
  const std::uint64_t qL = static_cast<std::uint64_t>(L / divisor), rL = static_cast<std::uint64_t>(L % divisor);
  const std::uint64_t qH = static_cast<std::uint64_t>(half / divisor), rH = static_cast<std::uint64_t>(half % divisor);
  // The correction term lies in (-d, 2d); m bits hold it and E - d signed.
  const unsigned m = static_cast<unsigned>(std::bit_width(divisor - 1)) + 2;
  if (m > 64) fail(ErrorCode::kInvalidArgument, "divisor too large");
  const std::uint64_t mmask = mask_of(m);

  std::vector<std::uint64_t> q(n), r(n), cmp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t xi = x[i] & mask;
    if (s.owner()) {
      const std::uint64_t u0 = static_cast<std::uint64_t>((xi + half) % L);
      const i128 v0 = static_cast<i128>(u0) - rH;
      i128 qi = v0 / static_cast<i128>(divisor);
      if (v0 < 0 && qi * static_cast<i128>(divisor) != v0) --qi;
      q[i] = static_cast<std::uint64_t>(qi);
      r[i] = static_cast<std::uint64_t>(v0 - qi * static_cast<i128>(divisor));
      cmp[i] = u0;
    } else {
      q[i] = xi / divisor;
      r[i] = xi % divisor;
      cmp[i] = mask - xi;
    }
  }
  // w = 1 when the shifted shares wrap past 2^bits.
  const BoolShare w = compare_gt(s, cmp, bits);
  const auto W = b2a(s, w, std::max(bits, m));

  const bool two_sided = rL != 0;
  std::vector<std::uint64_t> e(two_sided ? 2 * n : n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t Ei = (r[i] - W[i] * rL) & mmask;
    e[i] = (Ei - (s.owner() ? divisor : 0)) & mmask;
    if (two_sided) e[n + i] = Ei;
  }
  // t = [E >= d] + [E >= 0] - 1, with [E >= 0] = 1 when rL = 0.
  const BoolShare p = positive(s, e, m);
  const auto T = b2a(s, p, bits);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t t = T[i];
    if (two_sided) t += T[n + i] - (s.owner() ? 1 : 0);
    std::uint64_t v = q[i] - W[i] * qL + t;
    if (s.owner()) v -= qH;
    out[i] = v & mask;
  }
  return out;
}

std::vector<std::uint64_t> truncate(Session& s, std::span<const std::uint64_t> x, unsigned shift, unsigned bits,
                                    TruncMode mode) {
  check_bits(bits);
  if (shift >= bits) fail(ErrorCode::kInvalidArgument, "shift must be below the ring width");
  if (shift == 0) return {x.begin(), x.end()};
  if (mode == TruncMode::kFaithful) return divide_public(s, x, std::uint64_t{1} << shift, bits);
  const std::uint64_t mask = mask_of(bits);
  std::vector<std::uint64_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (s.owner())
      out[i] = (x[i] & mask) >> shift;
    else
      out[i] = (0 - (((0 - x[i]) & mask) >> shift)) & mask;
  }
  return out;
}

TriplePool::TriplePool(TripleBatch batch, unsigned bits) : t_(std::move(batch)), used_(t_.a.size(), 0), bits_(bits) {}

void TriplePool::claim(std::size_t i) {
  if (i >= used_.size()) fail(ErrorCode::kTripleExhausted, "triple index out of range");
  if (used_[i]) fail(ErrorCode::kTripleReuse, "triple " + std::to_string(i) + " already consumed");
  used_[i] = 1;
}

std::size_t TriplePool::take(std::size_t n) {
  if (n > remaining()) fail(ErrorCode::kTripleExhausted, "not enough triples");
  for (std::size_t i = cursor_; i < cursor_ + n; ++i) claim(i);
  cursor_ += n;
  return cursor_ - n;
}

TriplePool gen_triples(Session& s, std::size_t n, unsigned bits, TripleBackend backend, const Seed& dealer_seed) {
  check_bits(bits);
  const std::uint64_t mask = mask_of(bits);
  TripleBatch t{std::vector<std::uint64_t>(n), std::vector<std::uint64_t>(n), std::vector<std::uint64_t>(n)};
  if (backend == TripleBackend::kDealer) {
    Prng dealer(Prng::derive_seed(dealer_seed, "dealer/triples"));
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t a = dealer.next_bits(bits), b = dealer.next_bits(bits);
      const std::uint64_t c = (a * b) & mask;
      const std::uint64_t a1 = dealer.next_bits(bits), b1 = dealer.next_bits(bits), c1 = dealer.next_bits(bits);
      if (s.owner()) {
        t.a[i] = (a - a1) & mask;
        t.b[i] = (b - b1) & mask;
        t.c[i] = (c - c1) & mask;
      } else {
        t.a[i] = a1;
        t.b[i] = b1;
        t.c[i] = c1;
      }
    }
    return TriplePool(std::move(t), bits);
  }

  for (std::size_t i = 0; i < n; ++i) {
    t.a[i] = s.prng().next_bits(bits);
    t.b[i] = s.prng().next_bits(bits);
    t.c[i] = (t.a[i] * t.b[i]) & mask;
  }
  // Cross terms a_owner * b_cloud and a_cloud * b_owner, each from one
  // correlated OT per bit of the chooser's b.
  const std::size_t R = n * bits;
  std::vector<std::uint64_t> m0(R), m1(R), y(R);
  std::vector<std::uint8_t> choice(R);
  for (std::size_t i = 0; i < n; ++i) {
    for (unsigned j = 0; j < bits; ++j) {
      const std::uint64_t rj = s.prng().next_bits(bits);
      m0[i * bits + j] = rj;
      m1[i * bits + j] = (rj + (t.a[i] << j)) & mask;
      choice[i * bits + j] = (t.b[i] >> j) & 1;
      t.c[i] -= rj;
    }
  }
  for (int phase = 0; phase < 2; ++phase) {
    const bool i_send = (phase == 0) == s.owner();
    ot_words(s, i_send, m0, m1, choice, y, bits, net::MsgTag::kTrip);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (unsigned j = 0; j < bits; ++j) t.c[i] += y[i * bits + j];
    t.c[i] &= mask;
  }
  return TriplePool(std::move(t), bits);
}

std::vector<std::uint64_t> secure_mul(Session& s, TriplePool& pool, std::span<const std::uint64_t> x,
                                      std::span<const std::uint64_t> y) {
  const std::size_t n = x.size();
  if (y.size() != n) fail(ErrorCode::kShapeMismatch, "operands differ in length");
  const unsigned bits = pool.bits();
  const std::uint64_t mask = mask_of(bits);
  const std::size_t first = pool.take(n);
  const auto& t = pool.triples();
  std::vector<std::uint64_t> open(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    open[i] = (x[i] - t.a[first + i]) & mask;
    open[n + i] = (y[i] - t.b[first + i]) & mask;
  }
  const Bytes peer = s.exchange(net::MsgTag::kMult, pack_words(open, bits));
  std::vector<std::uint64_t> theirs(2 * n);
  unpack_words(peer, bits, theirs);
  std::vector<std::uint64_t> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t e = open[i] + theirs[i], f = open[n + i] + theirs[n + i];
    std::uint64_t v = t.c[first + i] + e * t.b[first + i] + f * t.a[first + i];
    if (s.owner()) v += e * f;
    z[i] = v & mask;
  }
  return z;
}

namespace {

ArithShare rewrap(const ArithShare& like, std::vector<std::uint64_t> words) {
  return ArithShare(like.party(), FixedTensor(like.shape(), std::move(words), like.config()));
}

}  // namespace

ArithShare relu(Session& s, const ArithShare& x) {
  const unsigned bits = x.config().bits;
  const auto d = positive(s, x.values().data(), bits);
  return rewrap(x, mux(s, d, x.values().data(), bits));
}

ArithShare divide_public(Session& s, const ArithShare& x, std::uint64_t divisor) {
  return rewrap(x, divide_public(s, x.values().data(), divisor, x.config().bits));
}

ArithShare truncate(Session& s, const ArithShare& x, unsigned shift, TruncMode mode) {
  return rewrap(x, truncate(s, x.values().data(), shift, x.config().bits, mode));
}

}  // namespace pinfer::gadgets
