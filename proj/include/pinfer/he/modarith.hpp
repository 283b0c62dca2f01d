#pragma once

#include <cstdint>

namespace pinfer::he {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

inline u64 add_mod(u64 a, u64 b, u64 p) {
  u64 s = a + b;
  return s >= p ? s - p : s;
}
inline u64 sub_mod(u64 a, u64 b, u64 p) { return a >= b ? a - b : a + p - b; }
inline u64 mul_mod(u64 a, u64 b, u64 p) { return static_cast<u64>(static_cast<u128>(a) * b % p); }

u64 pow_mod(u64 base, u64 exp, u64 p);
u64 inv_mod(u64 a, u64 p);
bool is_prime(u64 n);

// Shoup's precomputed multiplication by a fixed operand w (requires p < 2^62).
inline u64 shoup_precompute(u64 w, u64 p) {
  return static_cast<u64>((static_cast<u128>(w) << 64) / p);
}
inline u64 mul_shoup(u64 a, u64 w, u64 w_shoup, u64 p) {
  u64 q = static_cast<u64>((static_cast<u128>(a) * w_shoup) >> 64);
  u64 r = a * w - q * p;
  return r >= p ? r - p : r;
}

}  // namespace pinfer::he
