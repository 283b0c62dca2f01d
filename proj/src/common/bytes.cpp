#include "pinfer/common/bytes.hpp"

#include <algorithm>

#include <sodium.h>

namespace pinfer {

std::string to_hex(std::span<const std::uint8_t> data) {
  std::string out(data.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
  out.resize(data.size() * 2);
  return out;
}

Bytes from_hex(std::string_view hex) {
  Bytes out(hex.size() / 2 + 1);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr, &len, &end) != 0 ||
      end != hex.data() + hex.size()) {
    fail(ErrorCode::kDecode, "invalid hex string");
  }
  out.resize(len);
  return out;
}

std::string to_base64(std::span<const std::uint8_t> data) {
  constexpr int kVariant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(data.size(), kVariant), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), kVariant);
  out.resize(out.size() - 1);
  return out;
}

Bytes from_base64(std::string_view b64) {
  Bytes out(b64.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), b64.data(), b64.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != b64.data() + b64.size()) {
    fail(ErrorCode::kDecode, "invalid base64 string");
  }
  out.resize(len);
  return out;
}

Bytes pack_bits(std::span<const std::uint8_t> bits) {
  Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    out[i >> 3] |= static_cast<std::uint8_t>((bits[i] & 1u) << (i & 7));
  }
  return out;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t n) {
  if (packed.size() * 8 < n) fail(ErrorCode::kDecode, "bit string too short");
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (packed[i >> 3] >> (i & 7)) & 1u;
  return out;
}

}  // namespace pinfer

namespace pinfer {

Bytes pack_words(std::span<const std::uint64_t> words, unsigned bits) {
  Bytes out(packed_size(words.size(), bits), 0);
  const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  std::size_t bitpos = 0;
  for (auto w : words) {
    w &= mask;
    unsigned left = bits;
    while (left > 0) {
      const std::size_t byte = bitpos / 8;
      const unsigned off = bitpos % 8;
      const unsigned take = std::min(left, 8 - off);
      out[byte] |= static_cast<std::uint8_t>((w & ((1u << take) - 1)) << off);
      w >>= take;
      left -= take;
      bitpos += take;
    }
  }
  return out;
}

void unpack_words(std::span<const std::uint8_t> packed, unsigned bits, std::span<std::uint64_t> out) {
  if (packed.size() != packed_size(out.size(), bits)) fail(ErrorCode::kDecode, "packed word array has wrong size");
  std::size_t bitpos = 0;
  for (auto& w : out) {
    std::uint64_t v = 0;
    unsigned got = 0;
    while (got < bits) {
      const std::size_t byte = bitpos / 8;
      const unsigned off = bitpos % 8;
      const unsigned take = std::min(bits - got, 8 - off);
      v |= static_cast<std::uint64_t>((packed[byte] >> off) & ((1u << take) - 1)) << got;
      got += take;
      bitpos += take;
    }
    w = v;
  }
}

}  // namespace pinfer
