#include <cstring>

#include "pinfer/common/error.hpp"
#include "pinfer/ot/ot.hpp"

namespace pinfer::ot {

namespace {

using u128 = unsigned __int128;

constexpr std::size_t kKappa = 128;

u128 to_u128(Block b) { return (static_cast<u128>(b.hi) << 64) | b.lo; }
Block from_u128(u128 v) { return {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(v >> 64)}; }

Seed seed_of(Block b) {
  Seed s;
  std::memcpy(s.data(), &b, 16);
  return s;
}

std::size_t round_up(std::size_t n) { return (n + kKappa - 1) / kKappa * kKappa; }

// Rows are 128 columns of m bits each, stored as m/8 bytes per column;
// produces one Block per OT index.
void columns_to_rows(const std::vector<Bytes>& cols, std::size_t m, std::vector<Block>& rows) {
  rows.resize(m);
  Block tile[kKappa];
  for (std::size_t b = 0; b < m / kKappa; ++b) {
    for (std::size_t j = 0; j < kKappa; ++j) std::memcpy(&tile[j], cols[j].data() + b * 16, 16);
    transpose128(tile);
    std::memcpy(&rows[b * kKappa], tile, sizeof tile);
  }
}

void hash_with_tweak(CrHash& h, std::span<Block> data, std::uint64_t first_index) {
  for (std::size_t i = 0; i < data.size(); ++i) data[i] ^= Block{first_index + i, 0x6f74696b6e7000ULL};
  h.hash_in_place(data);
}

}  // namespace

void transpose128(Block rows[128]) {
  u128 a[128];
  for (int i = 0; i < 128; ++i) a[i] = to_u128(rows[i]);
  u128 mask = (static_cast<u128>(~0ULL) << 64) | ~0ULL;
  for (unsigned s = 64; s > 0; s >>= 1) {
    mask ^= mask << s;  // ones where (bit & s) == 0
    for (unsigned k = 0; k < 128; k = (k + s + 1) & ~s) {
      const u128 t = ((a[k] >> s) ^ a[k + s]) & mask;
      a[k] ^= t << s;
      a[k + s] ^= t;
    }
  }
  for (int i = 0; i < 128; ++i) rows[i] = from_u128(a[i]);
}

struct IknpEngine::SenderState {
  Block s;
  std::vector<Prng> prgs;
  std::uint64_t index = 0;
};

struct IknpEngine::ReceiverState {
  std::vector<Prng> prg0, prg1;
  std::uint64_t index = 0;
};

IknpEngine::IknpEngine(net::Channel& ch, const Seed& seed) : ch_(ch), prng_(seed) {}
IknpEngine::~IknpEngine() = default;

void IknpEngine::rot_send(std::span<Block> k0, std::span<Block> k1) {
  const std::size_t n = k0.size();
  if (k1.size() != n) fail(ErrorCode::kInvalidArgument, "key spans differ in length");
  if (!sender_) {
    sender_ = std::make_unique<SenderState>();
    sender_->s = prng_.next_block();
    std::vector<std::uint8_t> bits(kKappa);
    const u128 sv = to_u128(sender_->s);
    for (std::size_t j = 0; j < kKappa; ++j) bits[j] = static_cast<std::uint8_t>((sv >> j) & 1);
    std::vector<Block> seeds(kKappa);
    base_rot_recv(ch_, bits, seeds, prng_);
    for (auto& sd : seeds) sender_->prgs.emplace_back(seed_of(sd));
  }
  if (n == 0) return;
  const std::size_t m = round_up(n);
  const std::size_t col_bytes = m / 8;
  Bytes u = ch_.recv(net::MsgTag::kOtExtend);
  if (u.size() != kKappa * col_bytes) fail(ErrorCode::kTranscriptInvalid, "OT extension matrix has wrong size");

  std::vector<Bytes> cols(kKappa, Bytes(col_bytes));
  const u128 sv = to_u128(sender_->s);
  for (std::size_t j = 0; j < kKappa; ++j) {
    sender_->prgs[j].fill(cols[j]);
    if ((sv >> j) & 1) {
      const std::uint8_t* uj = u.data() + j * col_bytes;
      for (std::size_t b = 0; b < col_bytes; ++b) cols[j][b] ^= uj[b];
    }
  }
  std::vector<Block> q;
  columns_to_rows(cols, m, q);
  for (std::size_t i = 0; i < n; ++i) {
    k0[i] = q[i];
    k1[i] = q[i] ^ sender_->s;
  }
  hash_with_tweak(hash_, k0, sender_->index);
  hash_with_tweak(hash_, k1, sender_->index);
  sender_->index += m;
  generated_ += n;
}

void IknpEngine::rot_recv(std::span<std::uint8_t> choice, std::span<Block> key) {
  const std::size_t n = choice.size();
  if (key.size() != n) fail(ErrorCode::kInvalidArgument, "key span differs from choice count");
  if (!receiver_) {
    receiver_ = std::make_unique<ReceiverState>();
    std::vector<Block> s0(kKappa), s1(kKappa);
    base_rot_send(ch_, s0, s1, prng_);
    for (std::size_t j = 0; j < kKappa; ++j) {
      receiver_->prg0.emplace_back(seed_of(s0[j]));
      receiver_->prg1.emplace_back(seed_of(s1[j]));
    }
  }
  if (n == 0) return;
  const std::size_t m = round_up(n);
  const std::size_t col_bytes = m / 8;
  Bytes r(col_bytes);
  prng_.fill(r);
  std::vector<Bytes> t(kKappa, Bytes(col_bytes));
  Bytes u(kKappa * col_bytes);
  Bytes tmp(col_bytes);
  for (std::size_t j = 0; j < kKappa; ++j) {
    receiver_->prg0[j].fill(t[j]);
    receiver_->prg1[j].fill(tmp);
    std::uint8_t* uj = u.data() + j * col_bytes;
    for (std::size_t b = 0; b < col_bytes; ++b) uj[b] = t[j][b] ^ tmp[b] ^ r[b];
  }
  ch_.send(net::MsgTag::kOtExtend, u);
  std::vector<Block> rows;
  columns_to_rows(t, m, rows);
  for (std::size_t i = 0; i < n; ++i) {
    choice[i] = (r[i / 8] >> (i % 8)) & 1;
    key[i] = rows[i];
  }
  hash_with_tweak(hash_, key, receiver_->index);
  receiver_->index += m;
  generated_ += n;
}

DealerEngine::DealerEngine(const Seed& shared_seed, bool self_is_owner)
    : send_stream_(Prng::derive_seed(shared_seed, self_is_owner ? "dealer/owner-sends" : "dealer/cloud-sends")),
      recv_stream_(Prng::derive_seed(shared_seed, self_is_owner ? "dealer/cloud-sends" : "dealer/owner-sends")) {}

void DealerEngine::rot_send(std::span<Block> k0, std::span<Block> k1) {
  send_stream_.fill_blocks(k0);
  send_stream_.fill_blocks(k1);
  Bytes skip((k0.size() + 7) / 8);
  send_stream_.fill(skip);
  generated_ += k0.size();
}

void DealerEngine::rot_recv(std::span<std::uint8_t> choice, std::span<Block> key) {
  const std::size_t n = choice.size();
  std::vector<Block> k0(n), k1(n);
  recv_stream_.fill_blocks(k0);
  recv_stream_.fill_blocks(k1);
  Bytes bits((n + 7) / 8);
  recv_stream_.fill(bits);
  for (std::size_t i = 0; i < n; ++i) {
    choice[i] = (bits[i / 8] >> (i % 8)) & 1;
    key[i] = choice[i] ? k1[i] : k0[i];
  }
  generated_ += n;
}

}  // namespace pinfer::ot
