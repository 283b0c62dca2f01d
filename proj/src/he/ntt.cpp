#include "pinfer/he/ntt.hpp"

#include <bit>

#include "pinfer/common/error.hpp"
#include "pinfer/he/modarith.hpp"

namespace pinfer::he {

u64 pow_mod(u64 base, u64 exp, u64 p) {
  u64 result = 1 % p;
  base %= p;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, p);
    base = mul_mod(base, base, p);
    exp >>= 1;
  }
  return result;
}

u64 inv_mod(u64 a, u64 p) { return pow_mod(a, p - 2, p); }

bool is_prime(u64 n) {
  if (n < 2) return false;
  for (u64 sp : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % sp == 0) return n == sp;
  }
  u64 d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  // Deterministic witness set for 64-bit inputs.
  for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    u64 x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

namespace {

std::size_t bit_reverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

u64 find_psi(u64 p, std::size_t n) {
  const u64 order = 2 * n;
  if ((p - 1) % order != 0) fail(ErrorCode::kInvalidParams, "prime does not support this degree");
  for (u64 g = 2; g < p; ++g) {
    u64 cand = pow_mod(g, (p - 1) / order, p);
    if (pow_mod(cand, n, p) == p - 1) return cand;
  }
  fail(ErrorCode::kInvalidParams, "no primitive 2N-th root of unity");
}

}  // namespace

NttTables::NttTables(u64 prime, std::size_t degree) : p_(prime), n_(degree) {
  if (!std::has_single_bit(degree) || degree < 2) {
    fail(ErrorCode::kInvalidParams, "NTT degree must be a power of two");
  }
  if (prime >= (u64{1} << 62)) fail(ErrorCode::kInvalidParams, "NTT prime must be below 2^62");
  psi_ = find_psi(p_, n_);
  const u64 ipsi = inv_mod(psi_, p_);
  const int log_n = std::countr_zero(n_);
  psi_rev_.resize(n_);
  ipsi_rev_.resize(n_);
  psi_rev_shoup_.resize(n_);
  ipsi_rev_shoup_.resize(n_);
  u64 pw = 1, ipw = 1;
  for (std::size_t i = 0; i < n_; ++i) {
    std::size_t r = bit_reverse(i, log_n);
    psi_rev_[r] = pw;
    ipsi_rev_[r] = ipw;
    pw = mul_mod(pw, psi_, p_);
    ipw = mul_mod(ipw, ipsi, p_);
  }
  for (std::size_t i = 0; i < n_; ++i) {
    psi_rev_shoup_[i] = shoup_precompute(psi_rev_[i], p_);
    ipsi_rev_shoup_[i] = shoup_precompute(ipsi_rev_[i], p_);
  }
  n_inv_ = inv_mod(static_cast<u64>(n_) % p_, p_);
  n_inv_shoup_ = shoup_precompute(n_inv_, p_);
}

void NttTables::forward(std::span<u64> a) const {
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j1 = 2 * i * t;
      const u64 w = psi_rev_[m + i];
      const u64 ws = psi_rev_shoup_[m + i];
      for (std::size_t j = j1; j < j1 + t; ++j) {
        const u64 u = a[j];
        const u64 v = mul_shoup(a[j + t], w, ws, p_);
        a[j] = add_mod(u, v, p_);
        a[j + t] = sub_mod(u, v, p_);
      }
    }
  }
}

void NttTables::inverse(std::span<u64> a) const {
  std::size_t t = 1;
  for (std::size_t m = n_; m > 1; m >>= 1) {
    const std::size_t h = m >> 1;
    std::size_t j1 = 0;
    for (std::size_t i = 0; i < h; ++i) {
      const u64 w = ipsi_rev_[h + i];
      const u64 ws = ipsi_rev_shoup_[h + i];
      for (std::size_t j = j1; j < j1 + t; ++j) {
        const u64 u = a[j];
        const u64 v = a[j + t];
        a[j] = add_mod(u, v, p_);
        a[j + t] = mul_shoup(sub_mod(u, v, p_), w, ws, p_);
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (auto& x : a) x = mul_shoup(x, n_inv_, n_inv_shoup_, p_);
}

}  // namespace pinfer::he
