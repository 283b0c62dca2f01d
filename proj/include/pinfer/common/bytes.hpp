#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pinfer/common/error.hpp"

namespace pinfer {

using Bytes = std::vector<std::uint8_t>;

// Little-endian append-only writer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes initial) : buf_(std::move(initial)) {}

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void raw(std::span<const std::uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
  }
  void raw(std::string_view s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  // u32 length prefix followed by the bytes.
  void blob(std::span<const std::uint8_t> data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }
  // u32 count followed by count little-endian u64 words.
  void words(std::span<const std::uint64_t> w) {
    u32(static_cast<std::uint32_t>(w.size()));
    for (auto v : w) u64(v);
  }

  std::size_t size() const { return buf_.size(); }
  const Bytes& bytes() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

// Bounds-checked little-endian reader; any overrun throws kDecode.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::span<const std::uint8_t> blob() { return raw(u32()); }
  std::vector<std::uint64_t> words() {
    std::uint32_t n = u32();
    need(std::size_t{n} * 8);
    std::vector<std::uint64_t> out(n);
    for (auto& v : out) v = u64();
    return out;
  }
  void words_into(std::span<std::uint64_t> out) {
    std::uint32_t n = u32();
    if (n != out.size()) fail(ErrorCode::kDecode, "word array length mismatch");
    need(std::size_t{n} * 8);
    for (auto& v : out) v = u64();
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  void expect_end() const {
    if (remaining() != 0) fail(ErrorCode::kDecode, "trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail(ErrorCode::kDecode, "truncated input");
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);
std::string to_base64(std::span<const std::uint8_t> data);
Bytes from_base64(std::string_view b64);

// Packs a 0/1 byte vector into a little-endian bit string and back.
Bytes pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t n);

// Packs words of the given bit width back to back (little-endian bit order).
Bytes pack_words(std::span<const std::uint64_t> words, unsigned bits);
void unpack_words(std::span<const std::uint8_t> packed, unsigned bits, std::span<std::uint64_t> out);
inline std::size_t packed_size(std::size_t n, unsigned bits) { return (n * bits + 7) / 8; }

}  // namespace pinfer
