#include <algorithm>
#include <functional>
#include <limits>
#include <tuple>

#include "pinfer/he/packing.hpp"
#include "pinfer/layers/plan.hpp"

namespace pinfer::layers {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::vector<std::size_t> tile_starts(std::size_t total, std::size_t tile, std::size_t step) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0;; s += step) {
    out.push_back(s);
    if (s + tile >= total) break;
  }
  return out;
}

}  // namespace

ConvTiling choose_conv_tiling(std::size_t C, std::size_t H, std::size_t W, std::size_t M, std::size_t kh,
                              std::size_t kw, std::size_t degree, bool diagonal) {
  if (kh > H || kw > W) fail(ErrorCode::kPackingGeometry, "kernel larger than input");
  if (kh * kw > degree) fail(ErrorCode::kPackingGeometry, "kernel larger than the ring degree");
  ConvTiling t;
  t.cols = kh * W <= degree ? W : std::max(kw, degree / kh);
  t.rows = std::min(H, degree / t.cols);
  const std::size_t budget = degree / (t.rows * t.cols);
  const std::size_t spatial = tile_starts(H, t.rows, t.rows - kh + 1).size() *
                              tile_starts(W, t.cols, t.cols - kw + 1).size();
  auto best = std::make_tuple(std::numeric_limits<std::size_t>::max(), std::numeric_limits<std::size_t>::max());
  for (std::size_t c = 1; c <= std::min(C, budget); ++c) {
    const std::size_t m = diagonal ? c : std::min(M, budget / c);
    if (m == 0 || c * m > budget) continue;
    const std::size_t cg = ceil_div(C, c), mg = ceil_div(M, m);
    const std::size_t products = spatial * (diagonal ? cg : cg * mg);
    const auto cost = std::make_tuple(products, spatial * (cg + mg));
    if (cost < best) {
      best = cost;
      t.channels = c;
      t.out_channels = m;
    }
  }
  return t;
}

LinearPlan plan_fc(std::size_t in, std::size_t out, std::size_t degree, std::span<const std::uint64_t> weights) {
  // Column tiles of width c and row tiles of height r with r * c <= degree;
  // every column tile uses the full width so result slots line up.
  std::size_t best_c = 1, best_cost = std::numeric_limits<std::size_t>::max(), best_cts = best_cost;
  for (std::size_t c = 1; c <= std::min(in, degree); ++c) {
    const std::size_t r = std::min(out, degree / c);
    const std::size_t products = ceil_div(in, c) * ceil_div(out, r);
    const std::size_t cts = ceil_div(in, c) + ceil_div(out, r);
    if (products < best_cost || (products == best_cost && cts < best_cts)) {
      best_cost = products;
      best_cts = cts;
      best_c = c;
    }
  }
  const std::size_t c = best_c, r = std::min(out, degree / c);
  const he::MatVecLayout layout{r, c};
  LinearPlan p;
  p.in_size = in;
  p.out_size = out;
  const std::size_t nc = ceil_div(in, c), nr = ceil_div(out, r);
  for (std::size_t t = 0; t < nc; ++t) {
    std::vector<Slot> tile;
    for (std::size_t j = t * c; j < std::min(in, (t + 1) * c); ++j)
      tile.push_back({static_cast<std::uint32_t>(layout.input_slot(j - t * c)), static_cast<std::uint32_t>(j)});
    p.in_tiles.push_back(std::move(tile));
  }
  for (std::size_t t = 0; t < nr; ++t) {
    std::vector<Slot> tile;
    for (std::size_t i = t * r; i < std::min(out, (t + 1) * r); ++i)
      tile.push_back({static_cast<std::uint32_t>(layout.result_slot(i - t * r)), static_cast<std::uint32_t>(i)});
    p.out_tiles.push_back(std::move(tile));
  }
  for (std::size_t ro = 0; ro < nr; ++ro)
    for (std::size_t ci = 0; ci < nc; ++ci) {
      p.links.emplace_back(static_cast<std::uint32_t>(ci), static_cast<std::uint32_t>(ro));
      if (weights.empty()) continue;
      std::vector<std::uint64_t> sub(r * c, 0);
      for (std::size_t i = 0; i < r && ro * r + i < out; ++i)
        for (std::size_t j = 0; j < c && ci * c + j < in; ++j) sub[i * c + j] = weights[(ro * r + i) * in + ci * c + j];
      p.weights.push_back(he::pack_matvec_weights(sub, layout, degree));
    }
  return p;
}

namespace {

LinearPlan plan_conv_impl(std::size_t C, std::size_t H, std::size_t W, std::size_t M, std::size_t kh, std::size_t kw,
                          std::size_t stride, std::size_t degree, bool diagonal,
                          const std::function<std::uint64_t(std::size_t, std::size_t, std::size_t, std::size_t)>* wt) {
  if (stride == 0) fail(ErrorCode::kPackingGeometry, "stride must be positive");
  const ConvTiling t = choose_conv_tiling(C, H, W, M, kh, kw, degree, diagonal);
  const std::size_t OH = (H - kh) / stride + 1, OW = (W - kw) / stride + 1;
  LinearPlan p;
  p.in_size = C * H * W;
  p.out_size = M * OH * OW;
  const auto rows = tile_starts(H, t.rows, t.rows - kh + 1);
  const auto cols = tile_starts(W, t.cols, t.cols - kw + 1);
  const std::size_t cg = ceil_div(C, t.channels), mg = ceil_div(M, t.out_channels);

  for (std::size_t r0 : rows)
    for (std::size_t c0 : cols) {
      const std::size_t h = std::min(t.rows, H - r0), w = std::min(t.cols, W - c0);
      const he::Conv2dLayout layout{t.channels, h, w, t.out_channels, kh, kw};
      layout.check(degree);
      const std::uint32_t in_base = static_cast<std::uint32_t>(p.in_tiles.size());
      const std::uint32_t out_base = static_cast<std::uint32_t>(p.out_tiles.size());
      for (std::size_t g = 0; g < cg; ++g) {
        std::vector<Slot> tile;
        for (std::size_t c = g * t.channels; c < std::min(C, (g + 1) * t.channels); ++c)
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
              tile.push_back({static_cast<std::uint32_t>(layout.input_slot(c - g * t.channels, y, x)),
                              static_cast<std::uint32_t>((c * H + r0 + y) * W + c0 + x)});
        p.in_tiles.push_back(std::move(tile));
      }
      for (std::size_t g = 0; g < mg; ++g) {
        std::vector<Slot> tile;
        for (std::size_t m = g * t.out_channels; m < std::min(M, (g + 1) * t.out_channels); ++m)
          for (std::size_t i = 0; i < layout.out_h(); ++i)
            for (std::size_t j = 0; j < layout.out_w(); ++j) {
              const std::size_t gy = r0 + i, gx = c0 + j;
              if (gy % stride || gx % stride) continue;
              tile.push_back({static_cast<std::uint32_t>(layout.result_slot(m - g * t.out_channels, i, j)),
                              static_cast<std::uint32_t>((m * OH + gy / stride) * OW + gx / stride)});
            }
        p.out_tiles.push_back(std::move(tile));
      }
      for (std::size_t og = 0; og < mg; ++og)
        for (std::size_t ig = 0; ig < cg; ++ig) {
          if (diagonal && og != ig) continue;
          p.links.emplace_back(in_base + static_cast<std::uint32_t>(ig), out_base + static_cast<std::uint32_t>(og));
          if (!wt) continue;
          std::vector<std::uint64_t> sub(t.out_channels * t.channels * kh * kw, 0);
          for (std::size_t m = 0; m < t.out_channels && og * t.out_channels + m < M; ++m)
            for (std::size_t c = 0; c < t.channels && ig * t.channels + c < C; ++c)
              for (std::size_t a = 0; a < kh; ++a)
                for (std::size_t b = 0; b < kw; ++b)
                  sub[((m * t.channels + c) * kh + a) * kw + b] =
                      (*wt)(og * t.out_channels + m, ig * t.channels + c, a, b);
          p.weights.push_back(he::pack_conv_kernels(sub, layout, degree));
        }
    }
  return p;
}

}  // namespace

LinearPlan plan_conv(std::size_t C, std::size_t H, std::size_t W, std::size_t M, std::size_t kh, std::size_t kw,
                     std::size_t stride, std::size_t degree, std::span<const std::uint64_t> weights) {
  if (weights.empty()) return plan_conv_impl(C, H, W, M, kh, kw, stride, degree, false, nullptr);
  const std::function<std::uint64_t(std::size_t, std::size_t, std::size_t, std::size_t)> wt =
      [&](std::size_t m, std::size_t c, std::size_t a, std::size_t b) {
        return weights[((m * C + c) * kh + a) * kw + b];
      };
  return plan_conv_impl(C, H, W, M, kh, kw, stride, degree, false, &wt);
}

LinearPlan plan_batchnorm(const Shape& shape, std::size_t degree, std::span<const std::uint64_t> scale) {
  const std::size_t C = shape[0];
  const std::size_t per = shape_size(shape) / C;
  // Channels become a C x 1 x per map; the kernel is W_c on the diagonal.
  if (scale.empty()) return plan_conv_impl(C, 1, per, C, 1, 1, 1, degree, true, nullptr);
  const std::function<std::uint64_t(std::size_t, std::size_t, std::size_t, std::size_t)> wt =
      [&](std::size_t m, std::size_t c, std::size_t, std::size_t) { return m == c ? scale[c] : 0; };
  return plan_conv_impl(C, 1, per, C, 1, 1, 1, degree, true, &wt);
}

LinearPlan plan_layer(const model::LayerSpec& l, const Shape& in_shape, std::size_t degree, bool with_weights) {
  const std::span<const std::uint64_t> w = with_weights ? std::span<const std::uint64_t>(l.weights) : std::span<const std::uint64_t>{};
  switch (l.kind) {
    case model::LayerKind::kFc:
      return plan_fc(l.in_features, l.out_features, degree, w);
    case model::LayerKind::kConv2d:
      return plan_conv(in_shape[0], in_shape[1] + 2 * l.padding, in_shape[2] + 2 * l.padding, l.out_channels,
                       l.kernel_h, l.kernel_w, l.stride, degree, w);
    case model::LayerKind::kBatchNorm:
      return plan_batchnorm(in_shape, degree, w);
    default:
      fail(ErrorCode::kInvalidArgument, "layer has no linear plan");
  }
}

}  // namespace pinfer::layers
