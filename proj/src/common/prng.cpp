#include "pinfer/common/prng.hpp"

#include <cstring>

#include <sodium.h>

#include "pinfer/common/error.hpp"

namespace pinfer {

namespace {
constexpr std::size_t kBufferSize = 1u << 14;

void ensure_sodium() {
  if (sodium_init() < 0) fail(ErrorCode::kEntropyFailure, "libsodium initialisation failed");
}
}  // namespace

std::uint64_t RandomSource::next_u64() {
  std::uint8_t b[8];
  fill(b);
  std::uint64_t v;
  std::memcpy(&v, b, 8);
  return v;
}

OsEntropy::OsEntropy() { ensure_sodium(); }

void OsEntropy::fill(std::span<std::uint8_t> out) { randombytes_buf(out.data(), out.size()); }

Prng::Prng(const Seed& seed) : ctx_(EVP_CIPHER_CTX_new()), buf_(kBufferSize) {
  if (ctx_ == nullptr) fail(ErrorCode::kInternal, "EVP_CIPHER_CTX_new failed");
  unsigned char iv[16] = {0};
  if (EVP_EncryptInit_ex(ctx_, EVP_aes_128_ctr(), nullptr, seed.data(), iv) != 1) {
    fail(ErrorCode::kInternal, "PRNG key setup failed");
  }
  pos_ = buf_.size();
}

Prng::~Prng() {
  if (ctx_ != nullptr) EVP_CIPHER_CTX_free(ctx_);
}

Prng::Prng(Prng&& other) noexcept
    : ctx_(other.ctx_),
      buf_(std::move(other.buf_)),
      pos_(other.pos_),
      bit_cache_(other.bit_cache_),
      bits_left_(other.bits_left_) {
  other.ctx_ = nullptr;
}

Prng& Prng::operator=(Prng&& other) noexcept {
  if (this != &other) {
    if (ctx_ != nullptr) EVP_CIPHER_CTX_free(ctx_);
    ctx_ = other.ctx_;
    other.ctx_ = nullptr;
    buf_ = std::move(other.buf_);
    pos_ = other.pos_;
    bit_cache_ = other.bit_cache_;
    bits_left_ = other.bits_left_;
  }
  return *this;
}

Prng Prng::from_os() {
  ensure_sodium();
  Seed s;
  randombytes_buf(s.data(), s.size());
  return Prng(s);
}

Seed Prng::derive_seed(std::uint64_t seed, std::string_view label) {
  ensure_sodium();
  std::uint8_t key[8];
  for (int i = 0; i < 8; ++i) key[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  Seed out;
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const unsigned char*>(label.data()),
                     label.size(), key, sizeof key);
  return out;
}

Seed Prng::derive_seed(const Seed& parent, std::string_view label) {
  ensure_sodium();
  Seed out;
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const unsigned char*>(label.data()),
                     label.size(), parent.data(), parent.size());
  return out;
}

Seed Prng::fork_seed(std::string_view label) {
  Seed base;
  fill(base);
  return derive_seed(base, label);
}

void Prng::refill() {
  std::memset(buf_.data(), 0, buf_.size());
  int outl = 0;
  if (EVP_EncryptUpdate(ctx_, buf_.data(), &outl, buf_.data(), static_cast<int>(buf_.size())) != 1) {
    fail(ErrorCode::kInternal, "PRNG keystream failure");
  }
  pos_ = 0;
}

void Prng::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buf_.size()) refill();
    std::size_t n = std::min(out.size() - done, buf_.size() - pos_);
    std::memcpy(out.data() + done, buf_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

std::uint64_t Prng::next_u64() {
  if (buf_.size() - pos_ < 8) refill();
  std::uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

Block Prng::next_block() {
  Block b;
  b.lo = next_u64();
  b.hi = next_u64();
  return b;
}

std::uint8_t Prng::next_bit() {
  if (bits_left_ == 0) {
    bit_cache_ = next_u64();
    bits_left_ = 64;
  }
  std::uint8_t b = bit_cache_ & 1u;
  bit_cache_ >>= 1;
  --bits_left_;
  return b;
}

void Prng::fill_blocks(std::span<Block> out) {
  fill(std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(out.data()), out.size() * 16));
}

void Prng::fill_words(std::span<std::uint64_t> out) {
  fill(std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(out.data()), out.size() * 8));
}

}  // namespace pinfer
