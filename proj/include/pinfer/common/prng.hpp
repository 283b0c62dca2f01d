#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "pinfer/common/block.hpp"

namespace pinfer {

using Seed = std::array<std::uint8_t, 16>;

// Injectable entropy source. Production code draws from the OS; tests inject
// deterministic or forced sources.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
  virtual std::uint64_t next_u64();
};

// Operating-system entropy through libsodium.
class OsEntropy final : public RandomSource {
 public:
  OsEntropy();
  void fill(std::span<std::uint8_t> out) override;
};

// AES-128-CTR keystream generator. Deterministic for a given seed.
class Prng final : public RandomSource {
 public:
  explicit Prng(const Seed& seed);
  ~Prng() override;
  Prng(Prng&& other) noexcept;
  Prng& operator=(Prng&& other) noexcept;
  Prng(const Prng&) = delete;
  Prng& operator=(const Prng&) = delete;

  static Prng from_os();
  // Derives a seed from a numeric seed and a domain label.
  static Seed derive_seed(std::uint64_t seed, std::string_view label);
  static Seed derive_seed(const Seed& parent, std::string_view label);
  Seed fork_seed(std::string_view label);

  void fill(std::span<std::uint8_t> out) override;
  std::uint64_t next_u64() override;
  Block next_block();
  std::uint8_t next_bit();
  // Uniform value in [0, 2^bits).
  std::uint64_t next_bits(unsigned bits) {
    std::uint64_t v = next_u64();
    return bits >= 64 ? v : (v & ((std::uint64_t{1} << bits) - 1));
  }
  void fill_blocks(std::span<Block> out);
  void fill_words(std::span<std::uint64_t> out);

 private:
  void refill();

  EVP_CIPHER_CTX* ctx_ = nullptr;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::uint64_t bit_cache_ = 0;
  int bits_left_ = 0;
};

}  // namespace pinfer
