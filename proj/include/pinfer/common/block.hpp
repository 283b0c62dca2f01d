#pragma once

#include <cstdint>
#include <span>

#include <openssl/evp.h>

namespace pinfer {

// 128-bit value used for OT keys and hash inputs.
struct alignas(16) Block {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  friend Block operator^(Block a, Block b) { return {a.lo ^ b.lo, a.hi ^ b.hi}; }
  Block& operator^=(Block b) {
    lo ^= b.lo;
    hi ^= b.hi;
    return *this;
  }
  friend bool operator==(Block a, Block b) = default;
};
static_assert(sizeof(Block) == 16);

// Multiplication by x in GF(2^128) modulo x^128 + x^7 + x^2 + x + 1.
inline Block gf_double(Block b) {
  std::uint64_t carry = b.hi >> 63;
  Block out{b.lo << 1, (b.hi << 1) | (b.lo >> 63)};
  out.lo ^= carry * 0x87u;
  return out;
}

// AES-128 in ECB mode over whole blocks. One instance per thread.
class Aes128 {
 public:
  explicit Aes128(Block key);
  ~Aes128();
  Aes128(const Aes128&) = delete;
  Aes128& operator=(const Aes128&) = delete;

  void encrypt(std::span<const Block> in, std::span<Block> out);

 private:
  EVP_CIPHER_CTX* ctx_;
};

// Fixed-key correlation-robust hash H(x) = AES_k(x) ^ x applied in place.
class CrHash {
 public:
  CrHash();
  void hash_in_place(std::span<Block> data);
  Block hash(Block x);

 private:
  Aes128 aes_;
};

}  // namespace pinfer
