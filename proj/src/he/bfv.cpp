#include "pinfer/he/bfv.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <sodium.h>

#include "pinfer/common/error.hpp"
#include "pinfer/he/modarith.hpp"

namespace pinfer::he {

namespace {

constexpr int kCbdEta = 21;
constexpr double kCbdVariance = kCbdEta / 2.0;
constexpr double kTernaryVariance = 2.0 / 3.0;

u128 mul_u64_u128(u64 a, u128 b) {
  const u64 lo = static_cast<u64>(b);
  const u64 hi = static_cast<u64>(b >> 64);
  return static_cast<u128>(a) * lo + ((static_cast<u128>(a) * hi) << 64);
}

void require_hash(std::uint64_t expected, std::uint64_t got, const char* what) {
  if (expected != got) fail(ErrorCode::kParamMismatch, std::string(what) + " was created under different parameters");
}

u64 uniform_mod(Prng& prng, u64 p) {
  const unsigned bits = static_cast<unsigned>(std::bit_width(p));
  for (;;) {
    u64 v = prng.next_bits(bits);
    if (v < p) return v;
  }
}

// Uniform over {-1, 0, 1}, returned as a signed value.
int sample_ternary(Prng& prng) {
  for (;;) {
    unsigned v = static_cast<unsigned>(prng.next_bits(2));
    if (v < 3) return static_cast<int>(v) - 1;
  }
}

int sample_cbd(Prng& prng) {
  const u64 x = prng.next_u64();
  const u64 m = (u64{1} << kCbdEta) - 1;
  return std::popcount(x & m) - std::popcount((x >> kCbdEta) & m);
}

// Writes a small signed polynomial into every limb of an RNS polynomial.
RnsPoly small_to_rns(const HEContext& ctx, std::span<const std::int64_t> coeffs) {
  const std::size_t n = ctx.degree();
  RnsPoly out;
  out.data.resize(n * ctx.limbs());
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t c = coeffs[i];
      out.data[l * n + i] = c >= 0 ? static_cast<u64>(c) % p : p - (static_cast<u64>(-c) % p);
    }
  }
  return out;
}

void ntt_forward(const HEContext& ctx, RnsPoly& poly) {
  const std::size_t n = ctx.degree();
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    ctx.ntt(l).forward(std::span<u64>(poly.data).subspan(l * n, n));
  }
  poly.ntt_form = true;
}

void ntt_inverse(const HEContext& ctx, RnsPoly& poly) {
  const std::size_t n = ctx.degree();
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    ctx.ntt(l).inverse(std::span<u64>(poly.data).subspan(l * n, n));
  }
  poly.ntt_form = false;
}

RnsPoly pointwise_mul(const HEContext& ctx, const RnsPoly& a, const RnsPoly& b) {
  const std::size_t n = ctx.degree();
  RnsPoly out;
  out.data.resize(a.data.size());
  out.ntt_form = true;
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    for (std::size_t i = l * n; i < (l + 1) * n; ++i) out.data[i] = mul_mod(a.data[i], b.data[i], p);
  }
  return out;
}

void add_into(const HEContext& ctx, RnsPoly& acc, const RnsPoly& b) {
  const std::size_t n = ctx.degree();
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    for (std::size_t i = l * n; i < (l + 1) * n; ++i) acc.data[i] = add_mod(acc.data[i], b.data[i], p);
  }
}

void mul_add_into(const HEContext& ctx, RnsPoly& acc, const RnsPoly& a, const RnsPoly& b) {
  const std::size_t n = ctx.degree();
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    for (std::size_t i = l * n; i < (l + 1) * n; ++i) {
      acc.data[i] = add_mod(acc.data[i], mul_mod(a.data[i], b.data[i], p), p);
    }
  }
}

std::vector<std::int64_t> sample_small(const HEContext& ctx, Prng& prng, bool ternary) {
  std::vector<std::int64_t> v(ctx.degree());
  for (auto& c : v) c = ternary ? sample_ternary(prng) : sample_cbd(prng);
  return v;
}

double fresh_variance(const HEContext& ctx) {
  return kCbdVariance * (1.0 + 2.0 * static_cast<double>(ctx.degree()) * kTernaryVariance);
}

NoiseEstimate fresh_noise(const HEContext& ctx) {
  return NoiseEstimate{fresh_variance(ctx), static_cast<double>(ctx.q_mod_t())};
}

NoiseEstimate scaled_noise(const HEContext& ctx, const NoiseEstimate& in, const PlaintextNtt& pt) {
  NoiseEstimate out;
  out.variance = in.variance * std::max(1.0, pt.l2sq);
  out.fixed = in.fixed * std::max(1.0, pt.l1) +
              static_cast<double>(ctx.q_mod_t()) * (pt.l1 + 1.0);
  return out;
}

}  // namespace

double NoiseEstimate::bound_log2() const {
  const double b = kNoiseSigmas * std::sqrt(variance) + fixed;
  return std::log2(std::max(b, 1.0));
}

HEParams HEParams::toy() {
  HEParams p;
  p.poly_degree = 8;
  p.plain_bits = 8;
  p.limb_bits = {30, 30};
  p.insecure_toy = true;
  return p;
}

unsigned max_modulus_bits(std::size_t degree, unsigned security_bits) {
  struct Row {
    std::size_t n;
    unsigned b128, b192, b256;
  };
  // Ternary-secret RLWE bounds from the homomorphic encryption standard.
  static constexpr Row kTable[] = {
      {1024, 27, 19, 14},     {2048, 54, 37, 29},     {4096, 109, 75, 58},
      {8192, 218, 152, 118},  {16384, 438, 305, 237}, {32768, 881, 611, 476},
  };
  for (const auto& r : kTable) {
    if (r.n != degree) continue;
    switch (security_bits) {
      case 128: return r.b128;
      case 192: return r.b192;
      case 256: return r.b256;
      default: return 0;
    }
  }
  return 0;
}

std::shared_ptr<const HEContext> HEContext::create(const HEParams& params) {
  return std::shared_ptr<const HEContext>(new HEContext(params));
}

HEContext::HEContext(const HEParams& params) : params_(params) {
  const std::size_t n = params.poly_degree;
  if (!std::has_single_bit(n) || n < 8) fail(ErrorCode::kInvalidParams, "poly_degree must be a power of two >= 8");
  if (params.plain_bits < 2 || params.plain_bits > 60) fail(ErrorCode::kInvalidParams, "plain_bits out of range");
  if (params.limb_bits.empty() || params.limb_bits.size() > 3) {
    fail(ErrorCode::kInvalidParams, "ciphertext modulus needs 1 to 3 limbs");
  }
  if (params.max_depth < 1) fail(ErrorCode::kInvalidParams, "max_depth must be at least 1");

  const unsigned log_2n = static_cast<unsigned>(std::countr_zero(2 * n));
  const u64 step = u64{1} << std::max(params.plain_bits, log_2n);
  for (unsigned bits : params.limb_bits) {
    if (bits > 61 || bits < params.plain_bits + 2) {
      fail(ErrorCode::kInvalidParams, "limb size must lie in [plain_bits + 2, 61]");
    }
    const u64 limit = (u64{1} << bits) - 1;
    u64 found = 0;
    for (u64 k = (limit - 1) / step; k >= 1; --k) {
      const u64 cand = k * step + 1;
      if (std::find(primes_.begin(), primes_.end(), cand) != primes_.end()) continue;
      if (is_prime(cand)) {
        found = cand;
        break;
      }
    }
    if (found == 0) fail(ErrorCode::kInvalidParams, "no NTT-friendly prime below 2^" + std::to_string(bits));
    primes_.push_back(found);
  }

  q_ = 1;
  for (u64 p : primes_) q_ *= p;
  log2_q_ = 0;
  for (u64 p : primes_) log2_q_ += std::log2(static_cast<double>(p));
  if (log2_q_ > 120) fail(ErrorCode::kInvalidParams, "ciphertext modulus above 120 bits");

  if (!params.insecure_toy) {
    const unsigned max_bits = max_modulus_bits(n, params.security_bits);
    if (max_bits == 0) {
      fail(ErrorCode::kInvalidParams, "degree/security pair not in the lattice security table");
    }
    if (log2_q_ > static_cast<double>(max_bits)) {
      fail(ErrorCode::kInvalidParams, "log2(q) = " + std::to_string(log2_q_) + " exceeds " +
                                          std::to_string(max_bits) + " bits allowed for " +
                                          std::to_string(params.security_bits) + "-bit security");
    }
  }

  plain_mask_ = (u64{1} << params.plain_bits) - 1;
  const u128 delta = q_ >> params.plain_bits;
  for (u64 p : primes_) {
    delta_mod_.push_back(static_cast<u64>(delta % p));
    const u128 cof = q_ / p;
    crt_cofactor_.push_back(cof);
    crt_inv_.push_back(inv_mod(static_cast<u64>(cof % p), p));
    tables_.emplace_back(p, n);
  }
  q_mod_t_ = static_cast<u64>(q_) & plain_mask_;
  noise_ceiling_bits_ = log2_q_ - params.plain_bits - 2.0;

  const double fresh_bits = fresh_noise(*this).bound_log2();
  if (fresh_bits + 1.0 >= noise_ceiling_bits_) {
    fail(ErrorCode::kInvalidParams, "ciphertext modulus leaves no noise headroom");
  }

  ByteWriter w;
  w.u64(n);
  w.u32(params.plain_bits);
  w.u32(params.max_depth);
  for (u64 p : primes_) w.u64(p);
  unsigned char h[8];
  crypto_generichash(h, sizeof h, w.bytes().data(), w.size(), nullptr, 0);
  for (int i = 0; i < 8; ++i) params_hash_ |= u64{h[i]} << (8 * i);
}

u64 HEContext::lift_plain(u64 v, std::size_t limb) const {
  const u64 p = primes_[limb];
  v &= plain_mask_;
  if (v < (plain_mask_ >> 1) + 1) return v % p;
  return p - (plain_modulus() - v);
}

u64 HEContext::scale_and_round(std::span<const u64> residues) const {
  u128 x = 0;
  for (std::size_t i = 0; i < primes_.size(); ++i) {
    const u64 y = mul_mod(residues[i], crt_inv_[i], primes_[i]);
    x += mul_u64_u128(y, crt_cofactor_[i]);
    if (x >= q_) x -= q_;
  }
  // floor(x * 2^plain_bits / q) by binary long division, then round.
  u128 r = x;
  u64 quo = 0;
  for (unsigned i = 0; i < params_.plain_bits; ++i) {
    r <<= 1;
    quo <<= 1;
    if (r >= q_) {
      r -= q_;
      quo |= 1;
    }
  }
  if (2 * r >= q_) ++quo;
  return quo & plain_mask_;
}

KeyPair keygen(const HEContext& ctx, Prng& prng) {
  const std::size_t n = ctx.degree();
  KeyPair kp;
  kp.sk.params_hash = kp.pk.params_hash = ctx.params_hash();
  kp.sk.s = small_to_rns(ctx, sample_small(ctx, prng, true));
  ntt_forward(ctx, kp.sk.s);

  RnsPoly a;
  a.data.resize(n * ctx.limbs());
  a.ntt_form = true;
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    for (std::size_t i = 0; i < n; ++i) a.data[l * n + i] = uniform_mod(prng, ctx.primes()[l]);
  }
  RnsPoly e = small_to_rns(ctx, sample_small(ctx, prng, false));
  ntt_forward(ctx, e);

  RnsPoly as = pointwise_mul(ctx, a, kp.sk.s);
  add_into(ctx, as, e);
  kp.pk.p0.data.resize(as.data.size());
  kp.pk.p0.ntt_form = true;
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    for (std::size_t i = l * n; i < (l + 1) * n; ++i) kp.pk.p0.data[i] = sub_mod(0, as.data[i], p);
  }
  kp.pk.p1 = std::move(a);
  return kp;
}

namespace {

HECiphertext encrypt_zero(const HEContext& ctx, const PublicKey& pk, Prng& prng) {
  RnsPoly u = small_to_rns(ctx, sample_small(ctx, prng, true));
  ntt_forward(ctx, u);
  HECiphertext ct;
  ct.params_hash = ctx.params_hash();
  ct.c0 = pointwise_mul(ctx, pk.p0, u);
  ct.c1 = pointwise_mul(ctx, pk.p1, u);
  ntt_inverse(ctx, ct.c0);
  ntt_inverse(ctx, ct.c1);
  RnsPoly e1 = small_to_rns(ctx, sample_small(ctx, prng, false));
  RnsPoly e2 = small_to_rns(ctx, sample_small(ctx, prng, false));
  add_into(ctx, ct.c0, e1);
  add_into(ctx, ct.c1, e2);
  ct.noise = NoiseEstimate{fresh_variance(ctx), 0};
  return ct;
}

void add_scaled_plain(const HEContext& ctx, RnsPoly& c0, const PackedPlaintext& pt) {
  const std::size_t n = ctx.degree();
  if (pt.coeffs.size() != n) fail(ErrorCode::kInvalidArgument, "plaintext length differs from ring degree");
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    const u64 d = ctx.delta_mod(l);
    for (std::size_t i = 0; i < n; ++i) {
      const u64 m = pt.coeffs[i] & ctx.plain_mask();
      c0.data[l * n + i] = add_mod(c0.data[l * n + i], mul_mod(d, m % p, p), p);
    }
  }
}

}  // namespace

HECiphertext encrypt(const HEContext& ctx, const PublicKey& pk, const PackedPlaintext& pt, Prng& prng) {
  require_hash(ctx.params_hash(), pk.params_hash, "public key");
  for (u64 c : pt.coeffs) {
    if (c > ctx.plain_mask()) fail(ErrorCode::kInvalidArgument, "plaintext coefficient exceeds t");
  }
  HECiphertext ct = encrypt_zero(ctx, pk, prng);
  add_scaled_plain(ctx, ct.c0, pt);
  ct.noise = fresh_noise(ctx);
  return ct;
}

PackedPlaintext decrypt(const HEContext& ctx, const SecretKey& sk, const HECiphertext& ct) {
  require_hash(ctx.params_hash(), sk.params_hash, "secret key");
  require_hash(ctx.params_hash(), ct.params_hash, "ciphertext");
  if (ct.noise_budget(ctx) <= 0) {
    fail(ErrorCode::kNoiseExhausted, "noise budget exhausted; ciphertext integrity cannot be guaranteed");
  }
  const std::size_t n = ctx.degree();
  RnsPoly c1 = ct.c1;
  ntt_forward(ctx, c1);
  RnsPoly x = pointwise_mul(ctx, c1, sk.s);
  ntt_inverse(ctx, x);
  add_into(ctx, x, ct.c0);
  PackedPlaintext pt;
  pt.coeffs.resize(n);
  std::vector<u64> residues(ctx.limbs());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < ctx.limbs(); ++l) residues[l] = x.data[l * n + i];
    pt.coeffs[i] = ctx.scale_and_round(residues);
  }
  return pt;
}

HECiphertext eval_add(const HEContext& ctx, const HECiphertext& a, const HECiphertext& b) {
  require_hash(ctx.params_hash(), a.params_hash, "ciphertext");
  require_hash(ctx.params_hash(), b.params_hash, "ciphertext");
  HECiphertext out = a;
  add_into(ctx, out.c0, b.c0);
  add_into(ctx, out.c1, b.c1);
  out.noise.variance = a.noise.variance + b.noise.variance;
  out.noise.fixed = a.noise.fixed + b.noise.fixed + static_cast<double>(ctx.q_mod_t());
  out.depth = std::max(a.depth, b.depth);
  return out;
}

HECiphertext add_plain(const HEContext& ctx, const HECiphertext& ct, const PackedPlaintext& pt) {
  require_hash(ctx.params_hash(), ct.params_hash, "ciphertext");
  HECiphertext out = ct;
  add_scaled_plain(ctx, out.c0, pt);
  out.noise.fixed += static_cast<double>(ctx.q_mod_t());
  return out;
}

PlaintextNtt prepare_plaintext(const HEContext& ctx, const PackedPlaintext& pt) {
  const std::size_t n = ctx.degree();
  if (pt.coeffs.size() != n) fail(ErrorCode::kInvalidArgument, "plaintext length differs from ring degree");
  PlaintextNtt out;
  out.params_hash = ctx.params_hash();
  out.poly.data.resize(n * ctx.limbs());
  const u64 t = ctx.plain_modulus();
  for (std::size_t i = 0; i < n; ++i) {
    const u64 v = pt.coeffs[i] & ctx.plain_mask();
    const double mag = v < t / 2 ? static_cast<double>(v) : static_cast<double>(t - v);
    out.l1 += mag;
    out.l2sq += mag * mag;
    out.linf = std::max(out.linf, mag);
    for (std::size_t l = 0; l < ctx.limbs(); ++l) out.poly.data[l * n + i] = ctx.lift_plain(v, l);
  }
  ntt_forward(ctx, out.poly);
  return out;
}

CiphertextNtt to_ntt(const HEContext& ctx, const HECiphertext& ct) {
  require_hash(ctx.params_hash(), ct.params_hash, "ciphertext");
  CiphertextNtt out{ct.c0, ct.c1, ct.noise, ct.depth, ct.params_hash};
  ntt_forward(ctx, out.c0);
  ntt_forward(ctx, out.c1);
  return out;
}

HECiphertext from_ntt(const HEContext& ctx, const CiphertextNtt& ct) {
  HECiphertext out{ct.c0, ct.c1, ct.noise, ct.depth, ct.params_hash};
  ntt_inverse(ctx, out.c0);
  ntt_inverse(ctx, out.c1);
  return out;
}

CiphertextNtt zero_accumulator(const HEContext& ctx) {
  CiphertextNtt acc;
  acc.params_hash = ctx.params_hash();
  acc.c0.data.assign(ctx.degree() * ctx.limbs(), 0);
  acc.c1.data.assign(ctx.degree() * ctx.limbs(), 0);
  acc.c0.ntt_form = acc.c1.ntt_form = true;
  return acc;
}

void multiply_accumulate(const HEContext& ctx, CiphertextNtt& acc, const CiphertextNtt& ct,
                         const PlaintextNtt& pt) {
  require_hash(ctx.params_hash(), ct.params_hash, "ciphertext");
  require_hash(ctx.params_hash(), pt.params_hash, "plaintext");
  if (ct.depth + 1 > ctx.params().max_depth) {
    fail(ErrorCode::kDepthExceeded, "plaintext multiplication exceeds the supported depth of " +
                                        std::to_string(ctx.params().max_depth));
  }
  mul_add_into(ctx, acc.c0, ct.c0, pt.poly);
  mul_add_into(ctx, acc.c1, ct.c1, pt.poly);
  const NoiseEstimate term = scaled_noise(ctx, ct.noise, pt);
  acc.noise.variance += term.variance;
  acc.noise.fixed += term.fixed;
  acc.depth = std::max(acc.depth, ct.depth + 1);
}

HECiphertext eval_plain_mul(const HEContext& ctx, const HECiphertext& ct, const PackedPlaintext& pt) {
  CiphertextNtt acc = zero_accumulator(ctx);
  multiply_accumulate(ctx, acc, to_ntt(ctx, ct), prepare_plaintext(ctx, pt));
  return from_ntt(ctx, acc);
}

HECiphertext rerandomize(const HEContext& ctx, const PublicKey& pk, const HECiphertext& ct,
                         Prng& prng, unsigned flood_bits) {
  require_hash(ctx.params_hash(), ct.params_hash, "ciphertext");
  require_hash(ctx.params_hash(), pk.params_hash, "public key");
  HECiphertext z = encrypt_zero(ctx, pk, prng);
  HECiphertext out = ct;
  add_into(ctx, out.c0, z.c0);
  add_into(ctx, out.c1, z.c1);
  out.noise.variance += z.noise.variance;
  if (flood_bits > 0) {
    if (flood_bits > 100) fail(ErrorCode::kInvalidArgument, "flooding width too large");
    const std::size_t n = ctx.degree();
    const unsigned width = flood_bits + 1;  // magnitude bits plus sign
    const u128 span = (static_cast<u128>(1) << width) + 1;  // values in [-2^f, 2^f]
    for (std::size_t i = 0; i < n; ++i) {
      u128 r;
      for (;;) {
        r = (static_cast<u128>(prng.next_u64()) << 64) | prng.next_u64();
        r &= (static_cast<u128>(1) << (width + 1)) - 1;
        if (r < span) break;
      }
      const u128 half = static_cast<u128>(1) << flood_bits;
      for (std::size_t l = 0; l < ctx.limbs(); ++l) {
        const u64 p = ctx.primes()[l];
        const u64 v = r >= half ? static_cast<u64>((r - half) % p)
                                : sub_mod(0, static_cast<u64>((half - r) % p), p);
        out.c0.data[l * n + i] = add_mod(out.c0.data[l * n + i], v, p);
      }
    }
    out.noise.fixed += std::ldexp(1.0, static_cast<int>(flood_bits));
  }
  return out;
}

unsigned max_flood_bits(const HEContext& ctx, const HECiphertext& ct, double margin_bits) {
  const double var = ct.noise.variance + fresh_variance(ctx);
  const double used = kNoiseSigmas * std::sqrt(var) + ct.noise.fixed;
  const double allowed = std::exp2(ctx.noise_ceiling_bits() - margin_bits) - used;
  if (allowed < 2.0) return 0;
  return static_cast<unsigned>(std::floor(std::log2(allowed)));
}

void serialize_ciphertext_into(const HECiphertext& ct, ByteWriter& w) {
  w.u64(ct.params_hash);
  w.u32(ct.depth);
  w.f64(ct.noise.variance);
  w.f64(ct.noise.fixed);
  const std::size_t limbs_n = ct.c0.data.size();
  w.u32(static_cast<std::uint32_t>(limbs_n));
  for (const RnsPoly* poly : {&ct.c0, &ct.c1}) {
    for (u64 v : poly->data) w.u64(v);
  }
}

Bytes serialize_ciphertext(const HECiphertext& ct) {
  ByteWriter w;
  serialize_ciphertext_into(ct, w);
  return std::move(w).take();
}

namespace {
void read_poly(const HEContext& ctx, ByteReader& r, RnsPoly& poly) {
  const std::size_t n = ctx.degree();
  poly.data.resize(n * ctx.limbs());
  for (std::size_t l = 0; l < ctx.limbs(); ++l) {
    const u64 p = ctx.primes()[l];
    for (std::size_t i = 0; i < n; ++i) {
      const u64 v = r.u64();
      if (v >= p) fail(ErrorCode::kDecode, "ciphertext coefficient out of range");
      poly.data[l * n + i] = v;
    }
  }
}
}  // namespace

HECiphertext deserialize_ciphertext(const HEContext& ctx, ByteReader& r) {
  HECiphertext ct;
  ct.params_hash = r.u64();
  require_hash(ctx.params_hash(), ct.params_hash, "ciphertext");
  ct.depth = r.u32();
  ct.noise.variance = r.f64();
  ct.noise.fixed = r.f64();
  if (!(ct.noise.variance >= 0) || !(ct.noise.fixed >= 0)) fail(ErrorCode::kDecode, "invalid noise estimate");
  if (r.u32() != ctx.degree() * ctx.limbs()) fail(ErrorCode::kDecode, "ciphertext size mismatch");
  read_poly(ctx, r, ct.c0);
  read_poly(ctx, r, ct.c1);
  return ct;
}

Bytes serialize_public_key(const PublicKey& pk) {
  ByteWriter w;
  w.u64(pk.params_hash);
  w.u32(static_cast<std::uint32_t>(pk.p0.data.size()));
  for (const RnsPoly* poly : {&pk.p0, &pk.p1}) {
    for (u64 v : poly->data) w.u64(v);
  }
  return std::move(w).take();
}

PublicKey deserialize_public_key(const HEContext& ctx, std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PublicKey pk;
  pk.params_hash = r.u64();
  require_hash(ctx.params_hash(), pk.params_hash, "public key");
  if (r.u32() != ctx.degree() * ctx.limbs()) fail(ErrorCode::kDecode, "public key size mismatch");
  read_poly(ctx, r, pk.p0);
  read_poly(ctx, r, pk.p1);
  pk.p0.ntt_form = pk.p1.ntt_form = true;
  r.expect_end();
  return pk;
}

}  // namespace pinfer::he
