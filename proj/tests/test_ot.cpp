#include <gtest/gtest.h>

#include <sodium.h>

#include <bit>
#include <cmath>

#include "pinfer/common/error.hpp"
#include "pinfer/ot/ot.hpp"
#include "support/two_party.hpp"

using namespace pinfer;
using namespace pinfer::ot;
using testing_support::connected_pair;
using testing_support::run_pair;

namespace {

std::vector<Block> random_blocks(Prng& p, std::size_t n) {
  std::vector<Block> v(n);
  p.fill_blocks(v);
  return v;
}

std::vector<std::uint8_t> random_bits(Prng& p, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = p.next_bit();
  return v;
}

}  // namespace

TEST(BaseOt, FixedCases) {
  auto pair = connected_pair(10);
  Prng rs(Prng::derive_seed(1, "s")), rr(Prng::derive_seed(1, "r"));
  const Block a{0xAAAA, 1}, b{0xBBBB, 2};
  std::vector<Block> out(2);
  std::vector<std::uint8_t> choice{0, 1};
  std::vector<Block> m0{a, a}, m1{b, b};
  run_pair([&] { base_ot_send(*pair.a, m0, m1, rs); }, [&] { base_ot_recv(*pair.b, choice, out, rr); });
  EXPECT_EQ(out[0], a);
  EXPECT_EQ(out[1], b);
}

TEST(BaseOt, ThousandRandomAndOtherKeyUnknown) {
  auto pair = connected_pair(11);
  Prng rs(Prng::derive_seed(2, "s")), rr(Prng::derive_seed(2, "r")), data(Prng::derive_seed(2, "d"));
  const std::size_t n = 1000;
  auto m0 = random_blocks(data, n), m1 = random_blocks(data, n);
  auto choice = random_bits(data, n);
  std::vector<Block> out(n), k0(n), k1(n), kr(n);
  run_pair([&] { base_ot_send(*pair.a, m0, m1, rs); }, [&] { base_ot_recv(*pair.b, choice, out, rr); });
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(out[i], choice[i] ? m1[i] : m0[i]);
  run_pair([&] { base_rot_send(*pair.a, k0, k1, rs); }, [&] { base_rot_recv(*pair.b, choice, kr, rr); });
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_EQ(kr[i], choice[i] ? k1[i] : k0[i]);
    ASSERT_NE(kr[i], choice[i] ? k0[i] : k1[i]);
  }
}

TEST(BaseOt, InvalidPointRejected) {
  auto pair = connected_pair(12);
  Prng rr(Prng::derive_seed(3, "r"));
  std::vector<std::uint8_t> choice{1};
  std::vector<Block> out(1);
  ErrorCode code = ErrorCode::kInternal;
  run_pair([&] { pair.a->send(net::MsgTag::kOtSetup, Bytes(32, 0xFF)); },
           [&] {
             try {
               base_rot_recv(*pair.b, choice, out, rr);
             } catch (const Error& e) {
               code = e.code();
             }
           });
  EXPECT_EQ(code, ErrorCode::kTranscriptInvalid);
}

TEST(BaseOt, ReceiverFramesIndependentOfChoice) {
  // The receiver's only message is a list of group elements. For all-zero
  // versus all-one choices under the same seeds, frame lengths match and a
  // bit-frequency distinguisher over the payload does not separate them.
  std::size_t len[2] = {0, 0};
  std::array<std::uint64_t, 2> ones{0, 0};
  std::uint64_t total_bits = 0;
  for (int b = 0; b < 2; ++b) {
    for (int trial = 0; trial < 40; ++trial) {
      auto pair = connected_pair(13);
      Prng rr(Prng::derive_seed(200 + trial, "r"));
      std::vector<std::uint8_t> choice(64, static_cast<std::uint8_t>(b));
      std::vector<Block> out(64);
      Bytes payload;
      std::array<std::uint8_t, 32> scalar{}, point{};
      scalar[0] = static_cast<std::uint8_t>(trial + 3);
      crypto_scalarmult_ristretto255_base(point.data(), scalar.data());
      run_pair(
          [&] {
            pair.a->send(net::MsgTag::kOtSetup, point);
            payload = pair.a->recv(net::MsgTag::kOtSetup);
          },
          [&] { base_rot_recv(*pair.b, choice, out, rr); });
      len[b] = payload.size();
      for (auto byte : payload) ones[b] += static_cast<unsigned>(std::popcount(byte));
      if (b == 0) total_bits += payload.size() * 8;
    }
  }
  EXPECT_EQ(len[0], len[1]);
  const double diff = std::abs(static_cast<double>(ones[0]) - static_cast<double>(ones[1]));
  EXPECT_LT(diff, 5 * std::sqrt(static_cast<double>(total_bits) / 2));
}

TEST(Transpose, MatchesNaive) {
  Prng p(Prng::derive_seed(4, "t"));
  Block m[128], orig[128];
  p.fill_blocks(std::span<Block>(m, 128));
  std::copy(m, m + 128, orig);
  transpose128(m);
  auto bit = [](const Block& b, int i) { return i < 64 ? (b.lo >> i) & 1 : (b.hi >> (i - 64)) & 1; };
  for (int r = 0; r < 128; ++r)
    for (int c = 0; c < 128; ++c) ASSERT_EQ(bit(m[c], r), bit(orig[r], c));
}

class EngineTest : public ::testing::TestWithParam<bool> {};

TEST_P(EngineTest, RandomOtCorrelationsBothDirections) {
  const bool dealer = GetParam();
  auto pair = connected_pair(14);
  const Seed shared = Prng::derive_seed(5, "dealer");
  std::unique_ptr<OtEngine> ea, eb;
  if (dealer) {
    ea = std::make_unique<DealerEngine>(shared, true);
    eb = std::make_unique<DealerEngine>(shared, false);
  } else {
    ea = std::make_unique<IknpEngine>(*pair.a, Prng::derive_seed(5, "a"));
    eb = std::make_unique<IknpEngine>(*pair.b, Prng::derive_seed(5, "b"));
  }
  for (std::size_t n : {1, 127, 128, 129, 5000}) {
    std::vector<Block> k0(n), k1(n), kb(n), j0(n), j1(n), ja(n);
    std::vector<std::uint8_t> cb(n), ca(n);
    run_pair([&] { ea->rot_send(k0, k1); }, [&] { eb->rot_recv(cb, kb); });
    run_pair([&] { ea->rot_recv(ca, ja); }, [&] { eb->rot_send(j0, j1); });
    std::size_t ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(kb[i], cb[i] ? k1[i] : k0[i]) << n << " " << i;
      ASSERT_NE(kb[i], cb[i] ? k0[i] : k1[i]);
      ASSERT_EQ(ja[i], ca[i] ? j1[i] : j0[i]);
      ones += cb[i];
    }
    if (n == 5000) {
      EXPECT_GT(ones, 2300u);
      EXPECT_LT(ones, 2700u);
    }
  }
}

TEST_P(EngineTest, ChosenWordsBatch) {
  const bool dealer = GetParam();
  auto pair = connected_pair(15);
  const Seed shared = Prng::derive_seed(6, "dealer");
  std::unique_ptr<OtEngine> ea, eb;
  if (dealer) {
    ea = std::make_unique<DealerEngine>(shared, true);
    eb = std::make_unique<DealerEngine>(shared, false);
  } else {
    ea = std::make_unique<IknpEngine>(*pair.a, Prng::derive_seed(6, "a"));
    eb = std::make_unique<IknpEngine>(*pair.b, Prng::derive_seed(6, "b"));
  }
  Prng data(Prng::derive_seed(6, "d"));
  const std::size_t n = 128;
  std::vector<std::uint64_t> m0(n), m1(n), out(n);
  for (auto& v : m0) v = data.next_bits(41);
  for (auto& v : m1) v = data.next_bits(41);
  auto b = random_bits(data, n);
  run_pair([&] { send_words(*pair.a, *ea, m0, m1, 41, net::MsgTag::kMux); },
           [&] { recv_words(*pair.b, *eb, b, out, 41, net::MsgTag::kMux); });
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(out[i], b[i] ? m1[i] : m0[i]);
}

INSTANTIATE_TEST_SUITE_P(Backends, EngineTest, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Dealer" : "Iknp"; });

TEST(RandomOt, DerandomizeSingleAndReuseGuard) {
  DealerEngine es(Prng::derive_seed(7, "x"), true), er(Prng::derive_seed(7, "x"), false);
  auto snd = random_ot_send(es, 1);
  auto rcv = random_ot_recv(er, 1);
  const Block a{1, 0}, b{2, 0};
  const std::uint8_t e = rcv.correction(0, 1);
  auto masked = snd.derandomize(0, e, a, b);
  EXPECT_EQ(rcv.output(0, 1, masked), b);
  try {
    snd.derandomize(0, e, a, b);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kOtReuse);
  }
  EXPECT_THROW(rcv.correction(0, 0), Error);
}

TEST(RandomOt, Batch128) {
  DealerEngine es(Prng::derive_seed(8, "x"), false), er(Prng::derive_seed(8, "x"), true);
  Prng data(Prng::derive_seed(8, "d"));
  auto snd = random_ot_send(es, 128);
  auto rcv = random_ot_recv(er, 128);
  for (std::size_t i = 0; i < 128; ++i) {
    const Block m0 = data.next_block(), m1 = data.next_block();
    const std::uint8_t b = data.next_bit();
    auto masked = snd.derandomize(i, rcv.correction(i, b), m0, m1);
    ASSERT_EQ(rcv.output(i, b, masked), b ? m1 : m0);
  }
  for (std::size_t i = 0; i < 128; ++i) EXPECT_THROW(snd.derandomize(i, 0, {}, {}), Error);
}

TEST(RandomOt, ClaimExhaustion) {
  DealerEngine es(Prng::derive_seed(9, "x"), true);
  auto snd = random_ot_send(es, 10);
  EXPECT_EQ(snd.claim(6), 0u);
  EXPECT_EQ(snd.claim(4), 6u);
  EXPECT_THROW(snd.claim(1), Error);
}
