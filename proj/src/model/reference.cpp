#include "pinfer/model/reference.hpp"

namespace pinfer::model {

std::size_t bn_channels(const Shape& in_shape) { return in_shape[0]; }

std::vector<std::uint64_t> fc_accumulate(const LayerSpec& l, std::span<const std::uint64_t> x, std::size_t batch,
                                         const RingConfig& cfg, bool with_bias) {
  const std::size_t in = l.in_features, out = l.out_features;
  if (x.size() != batch * in) fail(ErrorCode::kShapeMismatch, "fc input size mismatch");
  std::vector<std::uint64_t> y(batch * out);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint64_t* xb = x.data() + b * in;
    for (std::size_t i = 0; i < out; ++i) {
      const std::uint64_t* w = l.weights.data() + i * in;
      std::uint64_t acc = with_bias ? l.bias[i] << cfg.frac : 0;
      for (std::size_t j = 0; j < in; ++j) acc += w[j] * xb[j];
      y[b * out + i] = acc & cfg.mask();
    }
  }
  return y;
}

std::vector<std::uint64_t> pad_input(std::span<const std::uint64_t> x, std::size_t batch, const Shape& in_shape,
                                     std::size_t padding) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  if (padding == 0) return {x.begin(), x.end()};
  const std::size_t Hp = H + 2 * padding, Wp = W + 2 * padding;
  std::vector<std::uint64_t> out(batch * C * Hp * Wp, 0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx)
          out[((b * C + c) * Hp + y + padding) * Wp + xx + padding] = x[((b * C + c) * H + y) * W + xx];
  return out;
}

std::vector<std::uint64_t> conv_accumulate(const LayerSpec& l, const Shape& in_shape,
                                           std::span<const std::uint64_t> x, std::size_t batch,
                                           const RingConfig& cfg, bool with_bias) {
  const std::size_t C = in_shape[0];
  if (x.size() != batch * shape_size(in_shape)) fail(ErrorCode::kShapeMismatch, "conv input size mismatch");
  const auto xp = pad_input(x, batch, in_shape, l.padding);
  const std::size_t H = in_shape[1] + 2 * l.padding, W = in_shape[2] + 2 * l.padding;
  const std::size_t M = l.out_channels, kh = l.kernel_h, kw = l.kernel_w, s = l.stride;
  const std::size_t OH = (H - kh) / s + 1, OW = (W - kw) / s + 1;
  std::vector<std::uint64_t> y(batch * M * OH * OW);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t i = 0; i < OH; ++i)
        for (std::size_t j = 0; j < OW; ++j) {
          std::uint64_t acc = with_bias ? l.bias[m] << cfg.frac : 0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t e = 0; e < kw; ++e)
                acc += l.weights[((m * C + c) * kh + a) * kw + e] * xp[((b * C + c) * H + i * s + a) * W + j * s + e];
          y[((b * M + m) * OH + i) * OW + j] = acc & cfg.mask();
        }
  return y;
}

std::vector<std::uint64_t> batchnorm_accumulate(const LayerSpec& l, const Shape& in_shape,
                                                std::span<const std::uint64_t> x, std::size_t batch,
                                                const RingConfig& cfg, bool with_bias) {
  const std::size_t n = shape_size(in_shape), C = bn_channels(in_shape), per = n / C;
  if (x.size() != batch * n) fail(ErrorCode::kShapeMismatch, "batchnorm input size mismatch");
  std::vector<std::uint64_t> y(x.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < per; ++p) {
        const std::size_t idx = b * n + c * per + p;
        y[idx] = (l.weights[c] * x[idx] + (with_bias ? l.bias[c] << cfg.frac : 0)) & cfg.mask();
      }
  return y;
}

std::vector<std::uint64_t> pool_sum(const LayerSpec& l, const Shape& in_shape, std::span<const std::uint64_t> x,
                                    std::size_t batch, const RingConfig& cfg) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t ph = l.pool_h, pw = l.pool_w, OH = H / ph, OW = W / pw;
  if (x.size() != batch * C * H * W) fail(ErrorCode::kShapeMismatch, "pool input size mismatch");
  std::vector<std::uint64_t> y(batch * C * OH * OW);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < OH; ++i)
        for (std::size_t j = 0; j < OW; ++j) {
          std::uint64_t acc = 0;
          for (std::size_t a = 0; a < ph; ++a)
            for (std::size_t e = 0; e < pw; ++e) acc += x[((b * C + c) * H + i * ph + a) * W + j * pw + e];
          y[((b * C + c) * OH + i) * OW + j] = acc & cfg.mask();
        }
  return y;
}

FixedTensor plaintext_infer(const ModelSpec& m, const FixedTensor& x) {
  const auto shapes = layer_shapes(m);
  require_same_config(x.config(), m.ring);
  const RingConfig& cfg = m.ring;
  std::size_t batch = 1;
  bool batched = false;
  if (x.shape() != m.input_shape) {
    Shape tail(x.shape().begin() + (x.shape().empty() ? 0 : 1), x.shape().end());
    if (x.shape().empty() || tail != m.input_shape)
      fail(ErrorCode::kShapeMismatch,
           "input shape " + shape_string(x.shape()) + " does not match model input " + shape_string(m.input_shape));
    batch = x.shape()[0];
    batched = true;
  }

  std::vector<std::vector<std::uint64_t>> outputs;
  std::vector<std::uint64_t> cur = x.words();
  Shape cur_shape = m.input_shape;
  const auto trunc = [&](std::vector<std::uint64_t>& v) {
    for (auto& w : v) w = ring_arith_shift(w, cfg.frac, cfg);
  };
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    switch (l.kind) {
      case LayerKind::kFc:
        cur = fc_accumulate(l, cur, batch, cfg);
        trunc(cur);
        break;
      case LayerKind::kConv2d:
        cur = conv_accumulate(l, cur_shape, cur, batch, cfg);
        trunc(cur);
        break;
      case LayerKind::kBatchNorm:
        cur = batchnorm_accumulate(l, cur_shape, cur, batch, cfg);
        trunc(cur);
        break;
      case LayerKind::kRelu:
        for (auto& w : cur)
          if (to_signed(w, cfg) < 0) w = 0;
        break;
      case LayerKind::kAvgPool:
        cur = pool_sum(l, cur_shape, cur, batch, cfg);
        for (auto& w : cur) w = ring_floor_div(w, l.pool_h * l.pool_w, cfg);
        break;
      case LayerKind::kAddSkip: {
        const auto& src = l.skip_from < 0 ? x.words() : outputs[static_cast<std::size_t>(l.skip_from)];
        for (std::size_t k = 0; k < cur.size(); ++k) cur[k] = (cur[k] + src[k]) & cfg.mask();
        break;
      }
    }
    cur_shape = shapes[i];
    outputs.push_back(cur);
  }
  Shape out_shape = cur_shape;
  if (batched) out_shape.insert(out_shape.begin(), batch);
  return FixedTensor(out_shape, std::move(cur), cfg);
}

}  // namespace pinfer::model
