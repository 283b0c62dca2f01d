#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pinfer/common/prng.hpp"
#include "pinfer/ring.hpp"
#include "support/oracles.hpp"

using namespace pinfer;

namespace {
const RingConfig kCfg{};
}

TEST(FixedPoint, EncodeKnownValues) {
  EXPECT_EQ(encode_fixed(1.0, kCfg).value, 4096u);
  EXPECT_EQ(encode_fixed(0.0, kCfg).value, 0u);
  EXPECT_EQ(encode_fixed(-1.0, kCfg).value, (1ULL << 41) - 4096);
}

TEST(FixedPoint, DecodeKnownValues) {
  EXPECT_EQ(decode_fixed({4096}, kCfg), 1.0);
  EXPECT_EQ(decode_fixed({(1ULL << 41) - 4096}, kCfg), -1.0);
  EXPECT_EQ(decode_fixed({6144}, kCfg), 1.5);
}

TEST(FixedPoint, RoundsHalfAwayFromZero) {
  const double half_ulp = std::ldexp(1.0, -13);
  EXPECT_EQ(encode_fixed(half_ulp, kCfg).value, 1u);
  EXPECT_EQ(encode_fixed(-half_ulp, kCfg).value, kCfg.mask());
  EXPECT_EQ(encode_fixed(3 * half_ulp, kCfg).value, 2u);
}

TEST(FixedPoint, OverflowRejected) {
  const double limit = std::ldexp(1.0, 41 - 12 - 1);
  EXPECT_THROW(encode_fixed(limit, kCfg), Error);
  EXPECT_THROW(encode_fixed(-limit, kCfg), Error);
  EXPECT_THROW(encode_fixed(NAN, kCfg), Error);
  EXPECT_NO_THROW(encode_fixed(limit - 1.0, kCfg));
}

TEST(FixedPoint, RoundTripWithinHalfUlp) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  const double tol = std::ldexp(1.0, -13);
  for (int i = 0; i < 20000; ++i) {
    const double r = dist(rng);
    EXPECT_LE(std::fabs(decode_fixed(encode_fixed(r, kCfg), kCfg) - r), tol);
  }
}

TEST(FixedPoint, TwosComplementSymmetry) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dist(0, 1e8);
  for (int i = 0; i < 5000; ++i) {
    const RingElement e = encode_fixed(dist(rng), kCfg);
    const RingElement neg{(kCfg.mask() + 1 - e.value) & kCfg.mask()};
    EXPECT_EQ(decode_fixed(neg, kCfg), -decode_fixed(e, kCfg));
  }
}

TEST(RingArith, WrapAndIdentity) {
  EXPECT_EQ(ring_add({(1ULL << 41) - 1}, {1}, kCfg).value, 0u);
  EXPECT_EQ(ring_mul({123456789}, {1}, kCfg).value, 123456789u);
  EXPECT_THROW(ring_add({1ULL << 41}, {1}, kCfg), Error);
}

TEST(RingArith, ProductOfHalvesBeforeRescale) {
  const auto half = encode_fixed(0.5, kCfg);
  const auto quarter = encode_fixed(0.25, kCfg);
  // Exact integer oracle: 2048 * 2048 = 1024 * 4096.
  const unsigned __int128 expect = static_cast<unsigned __int128>(half.value) * half.value;
  EXPECT_EQ(ring_mul(half, half, kCfg).value, static_cast<std::uint64_t>(expect) & kCfg.mask());
  EXPECT_EQ(ring_mul(half, half, kCfg).value, quarter.value << 12);
}

TEST(RingArith, AbelianGroupProperties) {
  Prng prng(Prng::derive_seed(1, "ring"));
  for (int i = 0; i < 10000; ++i) {
    RingElement a{prng.next_u64() & kCfg.mask()}, b{prng.next_u64() & kCfg.mask()},
        c{prng.next_u64() & kCfg.mask()};
    EXPECT_EQ(ring_add(ring_add(a, b, kCfg), c, kCfg), ring_add(a, ring_add(b, c, kCfg), kCfg));
    EXPECT_EQ(ring_add(a, b, kCfg), ring_add(b, a, kCfg));
    EXPECT_EQ(ring_add(a, ring_neg(a, kCfg), kCfg).value, 0u);
    EXPECT_EQ(ring_mul(a, b, kCfg), ring_mul(b, a, kCfg));
    EXPECT_EQ(ring_sub(a, b, kCfg), ring_add(a, ring_neg(b, kCfg), kCfg));
  }
}

TEST(RingArith, FloorDivMatchesOracle) {
  const RingConfig small = RingConfig::make(12, 2);
  for (std::uint64_t v = 0; v < 4096; ++v) {
    for (std::uint64_t d : {1, 2, 3, 4, 9, 4095}) {
      const std::int64_t q = oracle::floor_div(oracle::sgn(v, 12), static_cast<std::int64_t>(d));
      EXPECT_EQ(ring_floor_div(v, d, small), static_cast<std::uint64_t>(q) & small.mask());
    }
  }
  EXPECT_THROW(ring_floor_div(5, 0, small), Error);
}

TEST(RingConfig, Validation) {
  EXPECT_THROW(RingConfig::make(41, 1), Error);
  EXPECT_THROW(RingConfig::make(12, 12), Error);
  EXPECT_THROW(RingConfig::make(65, 12), Error);
  EXPECT_NO_THROW(RingConfig::make(64, 12));
}

TEST(FixedTensorTest, ShapeAndRangeChecks) {
  EXPECT_THROW(FixedTensor({2, 2}, std::vector<std::uint64_t>(3), kCfg), Error);
  EXPECT_THROW(FixedTensor({1}, std::vector<std::uint64_t>{1ULL << 41}, kCfg), Error);
  std::vector<double> vals{1.0, -2.5, 0.0, 3.25};
  auto t = FixedTensor::from_reals({2, 2}, vals, kCfg);
  EXPECT_EQ(t.to_reals(), vals);
  EXPECT_EQ(t.reshaped({4}).shape(), (Shape{4}));
  EXPECT_THROW(t.reshaped({3}), Error);
}
