#pragma once

#include <cstdint>
#include <vector>

namespace oracle {

// Schoolbook product in Z_{2^bits}[X]/(X^n + 1).
inline std::vector<std::uint64_t> negacyclic_mul(const std::vector<std::uint64_t>& a,
                                                 const std::vector<std::uint64_t>& b, unsigned bits) {
  const std::size_t n = a.size();
  const std::uint64_t mask = bits == 64 ? ~0ULL : (1ULL << bits) - 1;
  std::vector<std::uint64_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t p = a[i] * b[j];
      const std::size_t k = i + j;
      if (k < n) {
        out[k] += p;
      } else {
        out[k - n] -= p;
      }
    }
  }
  for (auto& v : out) v &= mask;
  return out;
}

inline std::int64_t sgn(std::uint64_t v, unsigned bits) {
  if (bits == 64) return static_cast<std::int64_t>(v);
  const std::uint64_t half = 1ULL << (bits - 1);
  return v >= half ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(half << 1)
                   : static_cast<std::int64_t>(v);
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t d) {
  std::int64_t q = a / d;
  if (a % d != 0 && ((a < 0) != (d < 0))) --q;
  return q;
}

}  // namespace oracle
