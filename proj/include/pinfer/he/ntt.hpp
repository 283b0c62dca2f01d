#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pinfer::he {

// Negacyclic NTT over Z_p[X]/(X^N + 1). Forward output is in bit-reversed
// order; pointwise products followed by inverse() give the negacyclic
// convolution in natural order.
class NttTables {
 public:
  NttTables(std::uint64_t prime, std::size_t degree);

  void forward(std::span<std::uint64_t> a) const;
  void inverse(std::span<std::uint64_t> a) const;

  std::uint64_t prime() const { return p_; }
  std::size_t degree() const { return n_; }
  std::uint64_t psi() const { return psi_; }

 private:
  std::uint64_t p_;
  std::size_t n_;
  std::uint64_t psi_;
  std::uint64_t n_inv_;
  std::uint64_t n_inv_shoup_;
  std::vector<std::uint64_t> psi_rev_, psi_rev_shoup_;
  std::vector<std::uint64_t> ipsi_rev_, ipsi_rev_shoup_;
};

}  // namespace pinfer::he
