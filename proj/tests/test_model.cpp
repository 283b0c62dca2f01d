#include <gtest/gtest.h>

#include <sodium.h>

#include <algorithm>
#include <cmath>

#include "pinfer/common/error.hpp"
#include "pinfer/model/model.hpp"
#include "pinfer/model/reference.hpp"

using namespace pinfer;
using namespace pinfer::model;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::vector<double> random_reals(Prng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
  return v;
}

bool mentions(const ValidationReport& r, const std::string& needle) {
  for (const auto& i : r.issues)
    if (i.message.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Container, MinimalFcRoundtrip) {
  const auto m = make_identity(4);
  const Bytes a = save_model(m);
  EXPECT_EQ(load_model(a), m);
  EXPECT_EQ(save_model(load_model(a)), a);
}

TEST(Container, FixturesRoundtripAndStableBytes) {
  for (const auto& m : {make_mlp(1), make_lenet5(1)}) {
    const Bytes a = save_model(m), b = save_model(m);
    EXPECT_EQ(a, b);
    EXPECT_EQ(load_model(a), m);
  }
  EXPECT_NE(save_model(make_mlp(1)), save_model(make_mlp(2)));
}

TEST(Container, CorruptionDetected) {
  Bytes a = save_model(make_mlp(3));
  Bytes truncated(a.begin(), a.end() - 100);
  EXPECT_EQ(code_of([&] { load_model(truncated); }), ErrorCode::kChecksum);
  Bytes flipped = a;
  flipped[a.size() / 2] ^= 0x10;
  EXPECT_EQ(code_of([&] { load_model(flipped); }), ErrorCode::kChecksum);
  EXPECT_EQ(code_of([&] { load_model(Bytes{1, 2, 3}); }), ErrorCode::kChecksum);
}

TEST(Container, VersionMismatch) {
  Bytes a = save_model(make_identity(2));
  Bytes body(a.begin(), a.end() - 32);
  body[8] = 9;  // version field
  Bytes out = body;
  std::uint8_t h[32];
  crypto_hash_sha256(h, body.data(), body.size());
  out.insert(out.end(), h, h + 32);
  EXPECT_EQ(code_of([&] { load_model(out); }), ErrorCode::kVersion);
}

TEST(Container, NonconformingGraphRejectedOnLoad) {
  auto m = make_mlp(4);
  m.layers[2].in_features = 65;
  m.layers[2].weights.resize(65 * 10);
  const Bytes a = save_model(m);
  EXPECT_EQ(code_of([&] { load_model(a); }), ErrorCode::kValidation);
}

TEST(Validate, PoolDivisibility) {
  ModelSpec m{"p", {1, 5, 5}, {avgpool_layer(2, 2)}, RingConfig{}};
  const auto r = validate_graph(m);
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r, "does not divide"));
}

TEST(Validate, LenetConforms) {
  const auto r = validate_graph(make_lenet5(1));
  EXPECT_TRUE(r.ok()) << r.str();
  EXPECT_EQ(r.shapes[0], (Shape{6, 28, 28}));
  EXPECT_EQ(r.shapes[3], (Shape{16, 10, 10}));
  EXPECT_EQ(r.shapes[5], (Shape{16, 5, 5}));
  EXPECT_EQ(r.shapes.back(), (Shape{10}));
}

TEST(Validate, FcAfterConvWithoutFlattenGeometry) {
  auto m = make_lenet5(1);
  m.layers[6].in_features = 256;
  m.layers[6].weights.resize(256 * 120);
  const auto r = validate_graph(m);
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r, "fc expects 256 inputs"));
}

TEST(Validate, ErrorsAreEnumerated) {
  ModelSpec m{"bad", {2, 5, 5}, {}, RingConfig{}};
  m.layers.push_back(avgpool_layer(2, 2));
  m.layers.push_back(add_skip_layer(3));
  LayerSpec relu = relu_layer();
  relu.weights = {1};
  m.layers.push_back(relu);
  const auto r = validate_graph(m);
  EXPECT_EQ(r.issues.size(), 3u) << r.str();
}

TEST(Plaintext, IdentityModel) {
  const RingConfig cfg;
  Prng rng(Prng::derive_seed(5, "x"));
  const auto m = make_identity(6);
  const auto x = FixedTensor::from_reals({6}, random_reals(rng, 6, -100, 100), cfg);
  EXPECT_EQ(plaintext_infer(m, x), x);
  const auto xb = FixedTensor::from_reals({3, 6}, random_reals(rng, 18, -100, 100), cfg);
  EXPECT_EQ(plaintext_infer(m, xb), xb);
}

TEST(Plaintext, SmallHandCases) {
  const RingConfig cfg;
  std::vector<double> w{2}, b{1}, x{3};
  ModelSpec m{"t", {1}, {fc_layer(1, 1, w, b, cfg)}, cfg};
  const auto y = plaintext_infer(m, FixedTensor::from_reals({1}, x, cfg));
  EXPECT_EQ(y.to_reals()[0], 7.0);

  // 2x2 all-ones kernel over [[1,2],[3,4]] then a 2x2 average.
  std::vector<double> k{1, 1, 1, 1}, kb{0}, img{1, 2, 3, 4};
  ModelSpec c{"c", {1, 2, 2}, {conv_layer(1, 1, 2, 1, 0, k, kb, cfg)}, cfg};
  EXPECT_EQ(plaintext_infer(c, FixedTensor::from_reals({1, 2, 2}, img, cfg)).to_reals()[0], 10.0);
  ModelSpec p{"p", {1, 2, 2}, {avgpool_layer(2, 2)}, cfg};
  EXPECT_EQ(plaintext_infer(p, FixedTensor::from_reals({1, 2, 2}, img, cfg)).to_reals()[0], 2.5);
}

TEST(Plaintext, LenetZeroImageBiasPropagation) {
  const RingConfig cfg;
  const auto m = make_lenet5(6);
  const auto& L = m.layers;
  auto shift = [&](std::int64_t v) { return v >> cfg.frac; };
  auto s = [&](std::uint64_t w) { return to_signed(w, cfg); };
  // A zero image turns every map into a per-channel constant.
  std::vector<std::int64_t> v1(6);
  for (int c = 0; c < 6; ++c) v1[c] = std::max<std::int64_t>(s(L[0].bias[c]), 0);
  std::vector<std::int64_t> v2(16);
  for (int mo = 0; mo < 16; ++mo) {
    std::int64_t acc = s(L[3].bias[mo]) << cfg.frac;
    for (int c = 0; c < 6; ++c)
      for (int k = 0; k < 25; ++k) acc += s(L[3].weights[(mo * 6 + c) * 25 + k]) * v1[c];
    v2[mo] = std::max<std::int64_t>(shift(acc), 0);
  }
  auto dense = [&](const LayerSpec& l, const std::vector<std::int64_t>& in, bool relu) {
    std::vector<std::int64_t> out(l.out_features);
    for (std::size_t i = 0; i < l.out_features; ++i) {
      std::int64_t acc = s(l.bias[i]) << cfg.frac;
      for (std::size_t j = 0; j < l.in_features; ++j) acc += s(l.weights[i * l.in_features + j]) * in[j];
      out[i] = relu ? std::max<std::int64_t>(shift(acc), 0) : shift(acc);
    }
    return out;
  };
  std::vector<std::int64_t> flat(400);
  for (int i = 0; i < 400; ++i) flat[i] = v2[i / 25];
  const auto logits = dense(L[10], dense(L[8], dense(L[6], flat, true), true), false);
  const auto y = plaintext_infer(m, FixedTensor({1, 28, 28}, cfg));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(s(y[i]), logits[i]);
}

TEST(Plaintext, DeterministicAndBatchConsistent) {
  const RingConfig cfg;
  Prng rng(Prng::derive_seed(7, "x"));
  const auto m = make_lenet5(7);
  const auto xb = FixedTensor::from_reals({3, 1, 28, 28}, random_reals(rng, 3 * 784, 0, 1), cfg);
  const auto y = plaintext_infer(m, xb);
  EXPECT_EQ(y, plaintext_infer(m, xb));
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<std::uint64_t> one(xb.words().begin() + b * 784, xb.words().begin() + (b + 1) * 784);
    const auto yb = plaintext_infer(m, FixedTensor({1, 28, 28}, one, cfg));
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(yb[i], y[b * 10 + i]);
  }
}

TEST(Plaintext, ShapeMismatchRejected) {
  const RingConfig cfg;
  EXPECT_EQ(code_of([&] { plaintext_infer(make_mlp(1), FixedTensor({783}, cfg)); }), ErrorCode::kShapeMismatch);
}

TEST(Plaintext, FixedPointFidelityVersusReals) {
  const RingConfig cfg;
  Prng rng(Prng::derive_seed(8, "w"));
  const auto w1 = random_reals(rng, 784 * 64, -1.0 / 28, 1.0 / 28), b1 = random_reals(rng, 64, -0.1, 0.1);
  const auto w2 = random_reals(rng, 640, -0.125, 0.125), b2 = random_reals(rng, 10, -0.1, 0.1);
  ModelSpec m{"mlp", {784}, {fc_layer(784, 64, w1, b1, cfg), relu_layer(), fc_layer(64, 10, w2, b2, cfg)}, cfg};
  int agree = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const auto x = random_reals(rng, 784, 0, 1);
    std::vector<double> h(64), z(10);
    for (int i = 0; i < 64; ++i) {
      double acc = b1[i];
      for (int j = 0; j < 784; ++j) acc += w1[i * 784 + j] * x[j];
      h[i] = std::max(acc, 0.0);
    }
    for (int i = 0; i < 10; ++i) {
      double acc = b2[i];
      for (int j = 0; j < 64; ++j) acc += w2[i * 64 + j] * h[j];
      z[i] = acc;
    }
    const auto y = plaintext_infer(m, FixedTensor::from_reals({784}, x, cfg)).to_reals();
    if (std::max_element(y.begin(), y.end()) - y.begin() == std::max_element(z.begin(), z.end()) - z.begin())
      ++agree;
  }
  EXPECT_GE(agree, trials * 99 / 100);
}

TEST(BatchNorm, FoldExample) {
  const RingConfig cfg;
  const std::vector<double> g{2}, b{3}, mu{1}, sigma{2};
  const auto f = batchnorm_fold(g, b, mu, sigma);
  EXPECT_EQ(f.scale[0], 1.0);
  EXPECT_EQ(f.shift[0], 2.0);
  ModelSpec m{"bn", {1}, {batchnorm_layer(f, cfg)}, cfg};
  std::vector<double> x{5};
  EXPECT_EQ(plaintext_infer(m, FixedTensor::from_reals({1}, x, cfg)).to_reals()[0], 7.0);
  const std::vector<double> one{1}, zero{0};
  const auto id = batchnorm_fold(one, zero, zero, one);
  EXPECT_EQ(id.scale[0], 1.0);
  EXPECT_EQ(id.shift[0], 0.0);
}

TEST(BatchNorm, NonPositiveSigmaRejected) {
  const std::vector<double> one{1}, zero{0}, neg{-1};
  EXPECT_EQ(code_of([&] { batchnorm_fold(one, zero, zero, zero); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { batchnorm_fold(one, zero, zero, neg); }), ErrorCode::kInvalidArgument);
}

TEST(BatchNorm, FoldedPathMatchesDirectFormula) {
  const RingConfig cfg;
  Prng rng(Prng::derive_seed(9, "bn"));
  const double tol = std::ldexp(1.0, -static_cast<int>(cfg.frac) + 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_reals(rng, 2, -2, 2), b = random_reals(rng, 2, -2, 2);
    const auto mu = random_reals(rng, 2, -1, 1), sigma = random_reals(rng, 2, 2, 4);
    ModelSpec m{"bn", {2, 3, 4}, {batchnorm_layer(batchnorm_fold(g, b, mu, sigma), cfg)}, cfg};
    const auto x = FixedTensor::from_reals({2, 3, 4}, random_reals(rng, 24, -1, 1), cfg);
    const auto xr = x.to_reals();
    const auto y = plaintext_infer(m, x).to_reals();
    for (int i = 0; i < 24; ++i) {
      const int c = i / 12;
      const double direct = g[c] * (xr[i] - mu[c]) / sigma[c] + b[c];
      ASSERT_LE(std::fabs(y[i] - direct), tol) << "trial " << trial << " element " << i;
    }
  }
}

TEST(Tensor, BinaryAndTextFormats) {
  const RingConfig cfg;
  Prng rng(Prng::derive_seed(10, "t"));
  const auto t = FixedTensor::from_reals({2, 3}, random_reals(rng, 6, -5, 5), cfg);
  EXPECT_EQ(load_tensor(save_tensor(t)), t);
  Bytes bad = save_tensor(t);
  bad[20] ^= 1;
  EXPECT_EQ(code_of([&] { load_tensor(bad); }), ErrorCode::kChecksum);
  const auto p = parse_tensor_text("# comment\nshape 2 2\n1 2.5\n-3 0.25\n", cfg);
  EXPECT_EQ(p.shape(), (Shape{2, 2}));
  EXPECT_EQ(p.to_reals(), (std::vector<double>{1, 2.5, -3, 0.25}));
  EXPECT_EQ(code_of([&] { parse_tensor_text("shape 3\n1 2\n", cfg); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { parse_tensor_text("1 x\n", cfg); }), ErrorCode::kDecode);
}
