#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pinfer/common/bytes.hpp"
#include "pinfer/common/prng.hpp"
#include "pinfer/he/ntt.hpp"

namespace pinfer::he {

// Parameters of the leveled RLWE scheme. The plaintext modulus is always a
// power of two, t = 2^plain_bits, so that plaintexts live in the share ring.
struct HEParams {
  std::size_t poly_degree = 4096;
  unsigned plain_bits = 41;
  // Upper bounds (in bits) for each RNS prime of the ciphertext modulus.
  std::vector<unsigned> limb_bits = {55, 54};
  unsigned security_bits = 128;
  unsigned max_depth = 1;
  // Admits parameter sets outside the lattice security tables. Test-only.
  bool insecure_toy = false;

  static HEParams defaults() { return HEParams{}; }
  // N = 8, t = 2^8, two 30-bit primes. Insecure; for exhaustive tests.
  static HEParams toy();
};

// Largest log2(q) admitted for a ternary-secret RLWE instance of the given
// degree at the given security level, or 0 if the pair is not tabulated.
unsigned max_modulus_bits(std::size_t degree, unsigned security_bits);

// Precomputed, immutable state for one parameter set.
class HEContext {
 public:
  static std::shared_ptr<const HEContext> create(const HEParams& params);

  const HEParams& params() const { return params_; }
  std::size_t degree() const { return params_.poly_degree; }
  std::size_t limbs() const { return primes_.size(); }
  const std::vector<std::uint64_t>& primes() const { return primes_; }
  const NttTables& ntt(std::size_t limb) const { return tables_[limb]; }
  std::uint64_t plain_mask() const { return plain_mask_; }
  std::uint64_t plain_modulus() const { return plain_mask_ + 1; }
  double log2_q() const { return log2_q_; }
  // log2 of the largest noise magnitude that still decrypts correctly,
  // minus a safety margin.
  double noise_ceiling_bits() const { return noise_ceiling_bits_; }
  std::uint64_t params_hash() const { return params_hash_; }
  // Δ = floor(q / t) reduced modulo each prime.
  std::uint64_t delta_mod(std::size_t limb) const { return delta_mod_[limb]; }
  // q mod t.
  std::uint64_t q_mod_t() const { return q_mod_t_; }

  // Maps a word mod t, read as a centered value in [-t/2, t/2), into a limb.
  std::uint64_t lift_plain(std::uint64_t v, std::size_t limb) const;
  // Recovers m = round(t * x / q) mod t from the RNS representation of x.
  std::uint64_t scale_and_round(std::span<const std::uint64_t> residues) const;

 private:
  explicit HEContext(const HEParams& params);

  HEParams params_;
  std::vector<std::uint64_t> primes_;
  std::vector<NttTables> tables_;
  std::uint64_t plain_mask_ = 0;
  double log2_q_ = 0;
  double noise_ceiling_bits_ = 0;
  std::uint64_t params_hash_ = 0;
  std::vector<std::uint64_t> delta_mod_;
  std::uint64_t q_mod_t_ = 0;
  unsigned __int128 q_ = 0;
  std::vector<std::uint64_t> crt_inv_;           // (q/q_i)^{-1} mod q_i
  std::vector<unsigned __int128> crt_cofactor_;  // q/q_i
};

using ContextPtr = std::shared_ptr<const HEContext>;

// Polynomial in RNS form: limb i occupies [i*N, (i+1)*N).
struct RnsPoly {
  std::vector<std::uint64_t> data;
  bool ntt_form = false;
};

// Conservative running bound on the decryption noise: a random component
// tracked by variance (bounded at kNoiseSigmas standard deviations) plus a
// worst-case deterministic component.
struct NoiseEstimate {
  double variance = 0;
  double fixed = 0;

  double bound_log2() const;
};
inline constexpr double kNoiseSigmas = 9.0;

struct SecretKey {
  RnsPoly s;  // NTT form
  std::uint64_t params_hash = 0;
};

struct PublicKey {
  RnsPoly p0;  // -(a*s + e), NTT form
  RnsPoly p1;  // a, NTT form
  std::uint64_t params_hash = 0;
};

struct PackedPlaintext {
  std::vector<std::uint64_t> coeffs;  // N coefficients mod t
};

struct HECiphertext {
  RnsPoly c0, c1;  // coefficient form
  NoiseEstimate noise;
  unsigned depth = 0;
  std::uint64_t params_hash = 0;

  // Remaining bits before decryption fails.
  double noise_budget(const HEContext& ctx) const {
    return ctx.noise_ceiling_bits() - noise.bound_log2();
  }
};

// Ciphertext and plaintext in NTT form for repeated plaintext products.
struct CiphertextNtt {
  RnsPoly c0, c1;
  NoiseEstimate noise;
  unsigned depth = 0;
  std::uint64_t params_hash = 0;
};

struct PlaintextNtt {
  RnsPoly poly;
  double l1 = 0;     // sum |p_i| over centered coefficients
  double l2sq = 0;   // sum p_i^2
  double linf = 0;   // max |p_i|
  std::uint64_t params_hash = 0;
};

struct KeyPair {
  PublicKey pk;
  SecretKey sk;
};

KeyPair keygen(const HEContext& ctx, Prng& prng);

HECiphertext encrypt(const HEContext& ctx, const PublicKey& pk, const PackedPlaintext& pt, Prng& prng);
PackedPlaintext decrypt(const HEContext& ctx, const SecretKey& sk, const HECiphertext& ct);

HECiphertext eval_add(const HEContext& ctx, const HECiphertext& a, const HECiphertext& b);
HECiphertext eval_plain_mul(const HEContext& ctx, const HECiphertext& ct, const PackedPlaintext& pt);
HECiphertext add_plain(const HEContext& ctx, const HECiphertext& ct, const PackedPlaintext& pt);
// Adds a fresh encryption of zero and, when flood_bits > 0, uniform noise in
// [-2^flood_bits, 2^flood_bits] to hide the evaluation history.
HECiphertext rerandomize(const HEContext& ctx, const PublicKey& pk, const HECiphertext& ct,
                         Prng& prng, unsigned flood_bits);
// Largest flooding width that leaves at least margin_bits of budget.
unsigned max_flood_bits(const HEContext& ctx, const HECiphertext& ct, double margin_bits);

PlaintextNtt prepare_plaintext(const HEContext& ctx, const PackedPlaintext& pt);
CiphertextNtt to_ntt(const HEContext& ctx, const HECiphertext& ct);
HECiphertext from_ntt(const HEContext& ctx, const CiphertextNtt& ct);
CiphertextNtt zero_accumulator(const HEContext& ctx);
// acc += ct * pt
void multiply_accumulate(const HEContext& ctx, CiphertextNtt& acc, const CiphertextNtt& ct,
                         const PlaintextNtt& pt);

// Params hash, depth, noise estimate, then per-limb coefficient arrays of c0
// and c1, little-endian and length-prefixed.
Bytes serialize_ciphertext(const HECiphertext& ct);
HECiphertext deserialize_ciphertext(const HEContext& ctx, ByteReader& reader);
void serialize_ciphertext_into(const HECiphertext& ct, ByteWriter& w);
Bytes serialize_public_key(const PublicKey& pk);
PublicKey deserialize_public_key(const HEContext& ctx, std::span<const std::uint8_t> bytes);

}  // namespace pinfer::he
