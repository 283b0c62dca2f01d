#include "pinfer/common/error.hpp"
#include "pinfer/ot/ot.hpp"

namespace pinfer::ot {

RandomOtSender::RandomOtSender(std::vector<Block> k0, std::vector<Block> k1)
    : k0_(std::move(k0)), k1_(std::move(k1)), used_(k0_.size(), 0) {}

void RandomOtSender::consume(std::size_t i) {
  if (i >= used_.size()) fail(ErrorCode::kInvalidArgument, "random OT index out of range");
  if (used_[i]) fail(ErrorCode::kOtReuse, "random OT instance " + std::to_string(i) + " already consumed");
  used_[i] = 1;
}

std::pair<Block, Block> RandomOtSender::derandomize(std::size_t i, std::uint8_t e, Block m0, Block m1) {
  consume(i);
  const Block& a = (e & 1) ? k1_[i] : k0_[i];
  const Block& b = (e & 1) ? k0_[i] : k1_[i];
  return {m0 ^ a, m1 ^ b};
}

std::size_t RandomOtSender::claim(std::size_t n) {
  if (cursor_ + n > size()) fail(ErrorCode::kOtReuse, "random OT batch exhausted");
  for (std::size_t i = cursor_; i < cursor_ + n; ++i) consume(i);
  cursor_ += n;
  return cursor_ - n;
}

RandomOtReceiver::RandomOtReceiver(std::vector<std::uint8_t> choice, std::vector<Block> key)
    : choice_(std::move(choice)), key_(std::move(key)), used_(key_.size(), 0) {}

std::uint8_t RandomOtReceiver::correction(std::size_t i, std::uint8_t b) {
  if (i >= used_.size()) fail(ErrorCode::kInvalidArgument, "random OT index out of range");
  if (used_[i]) fail(ErrorCode::kOtReuse, "random OT instance " + std::to_string(i) + " already consumed");
  used_[i] = 1;
  return (b ^ choice_[i]) & 1;
}

Block RandomOtReceiver::output(std::size_t i, std::uint8_t b, std::pair<Block, Block> masked) const {
  return ((b & 1) ? masked.second : masked.first) ^ key_[i];
}

std::size_t RandomOtReceiver::claim(std::size_t n) {
  if (cursor_ + n > size()) fail(ErrorCode::kOtReuse, "random OT batch exhausted");
  for (std::size_t i = cursor_; i < cursor_ + n; ++i) {
    if (used_[i]) fail(ErrorCode::kOtReuse, "random OT instance " + std::to_string(i) + " already consumed");
    used_[i] = 1;
  }
  cursor_ += n;
  return cursor_ - n;
}

RandomOtSender random_ot_send(OtEngine& engine, std::size_t n) {
  std::vector<Block> k0(n), k1(n);
  engine.rot_send(k0, k1);
  return RandomOtSender(std::move(k0), std::move(k1));
}

RandomOtReceiver random_ot_recv(OtEngine& engine, std::size_t n) {
  std::vector<std::uint8_t> c(n);
  std::vector<Block> k(n);
  engine.rot_recv(c, k);
  return RandomOtReceiver(std::move(c), std::move(k));
}

void send_words(net::Channel& ch, OtEngine& engine, std::span<const std::uint64_t> m0,
                std::span<const std::uint64_t> m1, unsigned bits, net::MsgTag reply_tag) {
  const std::size_t n = m0.size();
  if (m1.size() != n) fail(ErrorCode::kInvalidArgument, "message spans differ in length");
  RandomOtSender rot = random_ot_send(engine, n);
  const Bytes corr = ch.recv(net::MsgTag::kOtCorrection);
  if (corr.size() != (n + 7) / 8) fail(ErrorCode::kTranscriptInvalid, "OT correction has wrong length");
  const auto e = unpack_bits(corr, n);
  std::vector<std::uint64_t> y(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [y0, y1] = rot.derandomize(i, e[i], Block{m0[i], 0}, Block{m1[i], 0});
    y[i] = y0.lo;
    y[n + i] = y1.lo;
  }
  ch.send(reply_tag, pack_words(y, bits));
}

void recv_words(net::Channel& ch, OtEngine& engine, std::span<const std::uint8_t> choice,
                std::span<std::uint64_t> out, unsigned bits, net::MsgTag reply_tag) {
  const std::size_t n = choice.size();
  if (out.size() != n) fail(ErrorCode::kInvalidArgument, "output span differs from choice count");
  RandomOtReceiver rot = random_ot_recv(engine, n);
  std::vector<std::uint8_t> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = rot.correction(i, choice[i]);
  ch.send(net::MsgTag::kOtCorrection, pack_bits(e));
  const Bytes reply = ch.recv(reply_tag);
  std::vector<std::uint64_t> y(2 * n);
  try {
    unpack_words(reply, bits, y);
  } catch (const Error&) {
    fail(ErrorCode::kTranscriptInvalid, "OT reply has wrong length");
  }
  const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = rot.output(i, choice[i], {Block{y[i], 0}, Block{y[n + i], 0}}).lo & mask;
  }
}

}  // namespace pinfer::ot
