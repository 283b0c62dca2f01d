#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <deque>

#include "pinfer/common/prng.hpp"
#include "pinfer/sharing.hpp"

using namespace pinfer;

namespace {

const RingConfig kCfg{};

// Yields a fixed script of words.
class ForcedSource final : public RandomSource {
 public:
  explicit ForcedSource(std::deque<std::uint64_t> words) : words_(std::move(words)) {}
  void fill(std::span<std::uint8_t> out) override {
    for (auto& b : out) b = static_cast<std::uint8_t>(next_u64());
  }
  std::uint64_t next_u64() override {
    auto v = words_.front();
    words_.pop_front();
    return v;
  }

 private:
  std::deque<std::uint64_t> words_;
};

FixedTensor scalar(std::uint64_t v, RingConfig cfg = kCfg) {
  return FixedTensor({1}, std::vector<std::uint64_t>{v}, cfg);
}

double chi_square(const std::vector<std::uint64_t>& counts, double expected) {
  double s = 0;
  for (auto c : counts) s += (c - expected) * (c - expected) / expected;
  return s;
}

}  // namespace

TEST(Share, ForcedRandomness) {
  ForcedSource src({3});
  auto s = share(scalar(5), src);
  EXPECT_EQ(s.share0.values()[0], 2u);
  EXPECT_EQ(s.share1.values()[0], 3u);
  EXPECT_EQ(s.share0.party(), PartyId::kOwner);
  EXPECT_EQ(s.share1.party(), PartyId::kCloud);
}

TEST(Share, ForcedWraparound) {
  const RingConfig l4{4, 2};
  ForcedSource src({7});
  auto s = share(scalar(0, l4), src);
  EXPECT_EQ(s.share0.values()[0], 9u);
  EXPECT_EQ(s.share1.values()[0], 7u);
  EXPECT_EQ(reconstruct(s)[0], 0u);
}

TEST(Share, ReconstructIdentity) {
  Prng prng(Prng::derive_seed(11, "share"));
  for (int i = 0; i < 1000; ++i) {
    FixedTensor x({3}, kCfg);
    for (auto& v : x.words()) v = prng.next_u64() & kCfg.mask();
    EXPECT_EQ(reconstruct(share(x, prng)), x);
  }
}

TEST(Share, SingleShareMarginalsAreUniform) {
  // 16-bit ring, 10^5 sharings of zero; both shares binned by high and low byte.
  const RingConfig r16{16, 4};
  Prng prng(Prng::derive_seed(12, "chi"));
  const int n = 100000;
  std::vector<std::uint64_t> hi0(256), lo0(256), hi1(256), lo1(256);
  for (int i = 0; i < n; ++i) {
    auto s = share(scalar(0, r16), prng);
    auto a = s.share0.values()[0], b = s.share1.values()[0];
    ++hi0[a >> 8], ++lo0[a & 255], ++hi1[b >> 8], ++lo1[b & 255];
  }
  boost::math::chi_squared dist(255);
  const double critical = boost::math::quantile(boost::math::complement(dist, 0.01));
  for (const auto* c : {&hi0, &lo0, &hi1, &lo1}) EXPECT_LT(chi_square(*c, n / 256.0), critical);
}

TEST(Share, LinearOps) {
  Prng prng(Prng::derive_seed(13, "lin"));
  auto a = share(scalar(3), prng), b = share(scalar(4), prng);
  EXPECT_EQ(reconstruct(add_shares(a.share0, b.share0), add_shares(a.share1, b.share1))[0], 7u);
  EXPECT_EQ(reconstruct(add_public(a.share0, scalar(2)), add_public(a.share1, scalar(2)))[0], 5u);
  EXPECT_EQ(reconstruct(mul_public(a.share0, scalar(2)), mul_public(a.share1, scalar(2)))[0], 6u);
  EXPECT_THROW(add_shares(a.share0, b.share1), Error);
}

TEST(Share, LinearityRandom) {
  Prng prng(Prng::derive_seed(14, "lin"));
  for (int i = 0; i < 1000; ++i) {
    const auto x = prng.next_u64() & kCfg.mask(), y = prng.next_u64() & kCfg.mask();
    auto a = share(scalar(x), prng), b = share(scalar(y), prng);
    EXPECT_EQ(reconstruct(add_shares(a.share0, b.share0), add_shares(a.share1, b.share1))[0],
              (x + y) & kCfg.mask());
    const auto c = prng.next_u64() & kCfg.mask();
    EXPECT_EQ(reconstruct(mul_public(a.share0, scalar(c)), mul_public(a.share1, scalar(c)))[0],
              (x * c) & kCfg.mask());
  }
}

TEST(Share, SerializationRoundTrip) {
  Prng prng(Prng::derive_seed(15, "ser"));
  FixedTensor x({2, 3}, kCfg);
  for (auto& v : x.words()) v = prng.next_u64() & kCfg.mask();
  auto s = share(x, prng);
  auto bytes = serialize_share(s.share1);
  EXPECT_EQ(deserialize_share(bytes), s.share1);
  bytes.pop_back();
  EXPECT_THROW(deserialize_share(bytes), Error);
}
