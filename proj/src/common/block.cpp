#include "pinfer/common/block.hpp"

#include <cstring>

#include "pinfer/common/error.hpp"

namespace pinfer {

Aes128::Aes128(Block key) : ctx_(EVP_CIPHER_CTX_new()) {
  if (ctx_ == nullptr) fail(ErrorCode::kInternal, "EVP_CIPHER_CTX_new failed");
  unsigned char k[16];
  std::memcpy(k, &key, 16);
  if (EVP_EncryptInit_ex(ctx_, EVP_aes_128_ecb(), nullptr, k, nullptr) != 1) {
    fail(ErrorCode::kInternal, "AES key setup failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx_, 0);
}

Aes128::~Aes128() { EVP_CIPHER_CTX_free(ctx_); }

void Aes128::encrypt(std::span<const Block> in, std::span<Block> out) {
  if (in.size() != out.size()) fail(ErrorCode::kInternal, "AES span size mismatch");
  constexpr std::size_t kMaxChunk = 1u << 20;  // EVP takes an int length
  std::size_t done = 0;
  while (done < in.size()) {
    std::size_t n = std::min(kMaxChunk, in.size() - done);
    int outl = 0;
    if (EVP_EncryptUpdate(ctx_, reinterpret_cast<unsigned char*>(out.data() + done), &outl,
                          reinterpret_cast<const unsigned char*>(in.data() + done),
                          static_cast<int>(n * 16)) != 1) {
      fail(ErrorCode::kInternal, "AES encryption failed");
    }
    done += n;
  }
}

namespace {
constexpr Block kHashKey{0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL};
}

CrHash::CrHash() : aes_(kHashKey) {}

void CrHash::hash_in_place(std::span<Block> data) {
  constexpr std::size_t kChunk = 1024;
  Block tmp[kChunk];
  for (std::size_t i = 0; i < data.size(); i += kChunk) {
    std::size_t n = std::min(kChunk, data.size() - i);
    aes_.encrypt(data.subspan(i, n), std::span<Block>(tmp, n));
    for (std::size_t j = 0; j < n; ++j) data[i + j] ^= tmp[j];
  }
}

Block CrHash::hash(Block x) {
  Block out;
  aes_.encrypt(std::span<const Block>(&x, 1), std::span<Block>(&out, 1));
  return out ^ x;
}

}  // namespace pinfer
