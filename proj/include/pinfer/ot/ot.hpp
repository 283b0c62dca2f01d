#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pinfer/common/block.hpp"
#include "pinfer/common/prng.hpp"
#include "pinfer/net/channel.hpp"

namespace pinfer::ot {

// Chou-Orlandi 1-out-of-2 OT over ristretto255. The random variant leaves
// the sender with two independent keys per instance and the receiver with
// the key selected by its choice bit.
void base_rot_send(net::Channel& ch, std::span<Block> k0, std::span<Block> k1, RandomSource& rng);
void base_rot_recv(net::Channel& ch, std::span<const std::uint8_t> choice, std::span<Block> out, RandomSource& rng);

// Chosen-message base OT: masked messages follow the key agreement.
void base_ot_send(net::Channel& ch, std::span<const Block> m0, std::span<const Block> m1, RandomSource& rng);
void base_ot_recv(net::Channel& ch, std::span<const std::uint8_t> choice, std::span<Block> out, RandomSource& rng);

// 128x128 bit-matrix transpose in place; bit c of rows[r] moves to bit r of
// rows[c].
void transpose128(Block rows[128]);

// Source of random OTs between two parties. Calls are paired: when one party
// calls rot_send(n) the peer calls rot_recv(n).
class OtEngine {
 public:
  virtual ~OtEngine() = default;
  virtual void rot_send(std::span<Block> k0, std::span<Block> k1) = 0;
  virtual void rot_recv(std::span<std::uint8_t> choice, std::span<Block> key) = 0;
  std::uint64_t generated() const { return generated_; }

 protected:
  std::uint64_t generated_ = 0;
};

// IKNP extension seeded by 128 base OTs per direction. Base OTs run lazily
// on the first request in each direction.
class IknpEngine final : public OtEngine {
 public:
  IknpEngine(net::Channel& ch, const Seed& seed);
  ~IknpEngine() override;

  void rot_send(std::span<Block> k0, std::span<Block> k1) override;
  void rot_recv(std::span<std::uint8_t> choice, std::span<Block> key) override;

 private:
  struct SenderState;
  struct ReceiverState;
  net::Channel& ch_;
  Prng prng_;
  CrHash hash_;
  std::unique_ptr<SenderState> sender_;
  std::unique_ptr<ReceiverState> receiver_;
};

// Test-only trusted dealer: both parties expand the same correlations from a
// shared seed, each keeping only its own side. No messages are exchanged.
class DealerEngine final : public OtEngine {
 public:
  // `self_is_owner` selects which of the two directional streams this party
  // sends on.
  DealerEngine(const Seed& shared_seed, bool self_is_owner);

  void rot_send(std::span<Block> k0, std::span<Block> k1) override;
  void rot_recv(std::span<std::uint8_t> choice, std::span<Block> key) override;

 private:
  Prng send_stream_;
  Prng recv_stream_;
};

// One-time random OT instances held by the sender.
class RandomOtSender {
 public:
  RandomOtSender() = default;
  RandomOtSender(std::vector<Block> k0, std::vector<Block> k1);
  std::size_t size() const { return k0_.size(); }
  // Consumes instance i with the receiver's correction bit e = b ^ c and
  // returns (m0 ^ k_e, m1 ^ k_{1-e}).
  std::pair<Block, Block> derandomize(std::size_t i, std::uint8_t e, Block m0, Block m1);
  // Claims the next n unused instances in order; returns the first index.
  std::size_t claim(std::size_t n);
  const Block& key0(std::size_t i) const { return k0_[i]; }
  const Block& key1(std::size_t i) const { return k1_[i]; }

 private:
  void consume(std::size_t i);
  std::vector<Block> k0_, k1_;
  std::vector<std::uint8_t> used_;
  std::size_t cursor_ = 0;
};

class RandomOtReceiver {
 public:
  RandomOtReceiver() = default;
  RandomOtReceiver(std::vector<std::uint8_t> choice, std::vector<Block> key);
  std::size_t size() const { return key_.size(); }
  // Consumes instance i for choice bit b; returns the correction bit to send.
  std::uint8_t correction(std::size_t i, std::uint8_t b);
  // Recovers m_b from the sender's pair for an instance already corrected.
  Block output(std::size_t i, std::uint8_t b, std::pair<Block, Block> masked) const;
  std::size_t claim(std::size_t n);
  std::uint8_t choice(std::size_t i) const { return choice_[i]; }
  const Block& key(std::size_t i) const { return key_[i]; }

 private:
  std::vector<std::uint8_t> choice_;
  std::vector<Block> key_;
  std::vector<std::uint8_t> used_;
  std::size_t cursor_ = 0;
};

RandomOtSender random_ot_send(OtEngine& engine, std::size_t n);
RandomOtReceiver random_ot_recv(OtEngine& engine, std::size_t n);

// Batched chosen-message OT on words of `bits` bits: the receiver sends the
// correction bits in an OT_CORRECTION frame, the sender answers with both
// masked messages under `reply_tag`.
void send_words(net::Channel& ch, OtEngine& engine, std::span<const std::uint64_t> m0,
                std::span<const std::uint64_t> m1, unsigned bits, net::MsgTag reply_tag);
void recv_words(net::Channel& ch, OtEngine& engine, std::span<const std::uint8_t> choice,
                std::span<std::uint64_t> out, unsigned bits, net::MsgTag reply_tag);

}  // namespace pinfer::ot
