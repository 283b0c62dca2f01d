#include <cmath>

#include "pinfer/layers/layers.hpp"
#include "pinfer/model/reference.hpp"

namespace pinfer::layers {

namespace {

using model::LayerKind;

constexpr double kFloodMargin = 2.0;

void check_header(ByteReader& r, std::uint32_t layer, std::size_t batch, std::size_t count, const char* what) {
  const std::uint32_t got_layer = r.u32(), got_batch = r.u32(), got_count = r.u32();
  if (got_layer != layer || got_batch != batch || got_count != count)
    fail(ErrorCode::kProtocolDesync, std::string(what) + " for layer " + std::to_string(got_layer) + " with " +
                                         std::to_string(got_count) + " ciphertexts, expected layer " +
                                         std::to_string(layer) + " with " + std::to_string(count));
}

void sync_marker(LayerContext& ctx, net::MsgTag tag, std::uint32_t layer, std::size_t n) {
  ByteWriter w;
  w.u32(layer);
  w.u64(n);
  if (ctx.owner()) {
    ctx.ch.send(tag, w.bytes());
  } else {
    const Bytes got = ctx.ch.recv(tag);
    if (got != w.bytes()) fail(ErrorCode::kProtocolDesync, "layer marker mismatch at layer " + std::to_string(layer));
  }
}

template <class F>
std::vector<std::uint64_t> chunked(const LayerContext& ctx, std::span<const std::uint64_t> x, F&& f) {
  std::vector<std::uint64_t> out;
  out.reserve(x.size());
  for (std::size_t off = 0; off < x.size(); off += ctx.gadget_batch) {
    const auto part = f(x.subspan(off, std::min(ctx.gadget_batch, x.size() - off)));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace

PreparedLinear prepare_linear(const LayerContext& ctx, const model::LayerSpec& l, const Shape& in_shape) {
  PreparedLinear p;
  p.plan = plan_layer(l, in_shape, ctx.he->degree(), ctx.owner());
  for (const auto& w : p.plan.weights) p.weights.push_back(he::prepare_plaintext(*ctx.he, w));
  p.plan.weights.clear();
  p.links_by_out.resize(p.plan.out_tiles.size());
  for (std::size_t k = 0; k < p.plan.links.size(); ++k) p.links_by_out[p.plan.links[k].second].push_back(k);
  return p;
}

std::vector<std::uint64_t> linear_exchange(LayerContext& ctx, const PreparedLinear& lin, std::uint32_t layer,
                                           std::span<const std::uint64_t> x, std::size_t batch,
                                           std::span<const std::uint64_t> local) {
  const LinearPlan& plan = lin.plan;
  const he::HEContext& he = *ctx.he;
  const std::size_t N = he.degree();
  const std::uint64_t mask = ctx.ring.mask();
  if (he.params().plain_bits != ctx.ring.bits) fail(ErrorCode::kConfigMismatch, "HE plaintext ring differs from share ring");
  if (x.size() != batch * plan.in_size) fail(ErrorCode::kShapeMismatch, "linear layer input size mismatch");
  std::vector<std::uint64_t> out(batch * plan.out_size);
  const std::size_t n_in = plan.in_tiles.size(), n_out = plan.out_tiles.size();

  if (!ctx.owner()) {
    ByteWriter w;
    w.u32(layer);
    w.u32(static_cast<std::uint32_t>(batch));
    w.u32(static_cast<std::uint32_t>(batch * n_in));
    for (std::size_t b = 0; b < batch; ++b) {
      const std::uint64_t* xb = x.data() + b * plan.in_size;
      for (const auto& tile : plan.in_tiles) {
        he::PackedPlaintext pt{std::vector<std::uint64_t>(N, 0)};
        for (const Slot& s : tile) pt.coeffs[s.coef] = xb[s.index];
        he::serialize_ciphertext_into(he::encrypt(he, ctx.pk, pt, ctx.prng), w);
      }
    }
    ctx.ch.send(net::MsgTag::kLinCt, w.bytes());
    const Bytes reply = ctx.ch.recv(net::MsgTag::kLinResult);
    ByteReader r(reply);
    check_header(r, layer, batch, batch * n_out, "result");
    for (std::size_t b = 0; b < batch; ++b)
      for (const auto& tile : plan.out_tiles) {
        const auto pt = he::decrypt(he, *ctx.sk, he::deserialize_ciphertext(he, r));
        for (const Slot& s : tile) out[b * plan.out_size + s.index] = pt.coeffs[s.coef] & mask;
      }
    r.expect_end();
    return out;
  }

  if (local.size() != out.size()) fail(ErrorCode::kShapeMismatch, "owner local product size mismatch");
  const Bytes req = ctx.ch.recv(net::MsgTag::kLinCt);
  ByteReader r(req);
  check_header(r, layer, batch, batch * n_in, "input");
  ByteWriter w;
  w.u32(layer);
  w.u32(static_cast<std::uint32_t>(batch));
  w.u32(static_cast<std::uint32_t>(batch * n_out));
  std::vector<he::CiphertextNtt> in(n_in);
  for (std::size_t b = 0; b < batch; ++b) {
    for (auto& ct : in) ct = he::to_ntt(he, he::deserialize_ciphertext(he, r));
    for (std::size_t o = 0; o < n_out; ++o) {
      auto acc = he::zero_accumulator(he);
      for (std::size_t k : lin.links_by_out[o]) he::multiply_accumulate(he, acc, in[plan.links[k].first], lin.weights[k]);
      // A uniform mask over every coefficient hides partial sums outside the
      // result slots as well.
      he::PackedPlaintext R{std::vector<std::uint64_t>(N)};
      for (auto& v : R.coeffs) v = ctx.prng.next_bits(ctx.ring.bits);
      auto ct = he::add_plain(he, he::from_ntt(he, acc), R);
      const unsigned flood = he::max_flood_bits(he, ct, kFloodMargin);
      ct = he::rerandomize(he, ctx.pk, ct, ctx.prng, flood);
      ct.noise = he::NoiseEstimate{0, std::exp2(he.noise_ceiling_bits() - kFloodMargin)};
      he::serialize_ciphertext_into(ct, w);
      for (const Slot& s : plan.out_tiles[o]) {
        const std::size_t idx = b * plan.out_size + s.index;
        out[idx] = (local[idx] - R.coeffs[s.coef]) & mask;
      }
    }
  }
  r.expect_end();
  ctx.ch.send(net::MsgTag::kLinResult, w.bytes());
  return out;
}

std::vector<std::uint64_t> truncate_shares(LayerContext& ctx, std::span<const std::uint64_t> x) {
  return chunked(ctx, x, [&](std::span<const std::uint64_t> part) {
    return gadgets::truncate(ctx.gadgets, part, ctx.ring.frac, ctx.ring.bits, ctx.trunc);
  });
}

std::vector<std::uint64_t> fc_forward(LayerContext& ctx, const model::LayerSpec& l, const PreparedLinear& lin,
                                      std::uint32_t layer, std::span<const std::uint64_t> x, std::size_t batch) {
  std::vector<std::uint64_t> local;
  if (ctx.owner()) local = model::fc_accumulate(l, x, batch, ctx.ring);
  return truncate_shares(ctx, linear_exchange(ctx, lin, layer, x, batch, local));
}

std::vector<std::uint64_t> conv2d_forward(LayerContext& ctx, const model::LayerSpec& l, const PreparedLinear& lin,
                                          std::uint32_t layer, const Shape& in_shape,
                                          std::span<const std::uint64_t> x, std::size_t batch) {
  std::vector<std::uint64_t> local;
  if (ctx.owner()) local = model::conv_accumulate(l, in_shape, x, batch, ctx.ring);
  const auto padded = model::pad_input(x, batch, in_shape, l.padding);
  return truncate_shares(ctx, linear_exchange(ctx, lin, layer, padded, batch, local));
}

std::vector<std::uint64_t> batchnorm_forward(LayerContext& ctx, const model::LayerSpec& l, const PreparedLinear& lin,
                                             std::uint32_t layer, const Shape& in_shape,
                                             std::span<const std::uint64_t> x, std::size_t batch) {
  std::vector<std::uint64_t> local;
  if (ctx.owner()) local = model::batchnorm_accumulate(l, in_shape, x, batch, ctx.ring);
  return truncate_shares(ctx, linear_exchange(ctx, lin, layer, x, batch, local));
}

std::vector<std::uint64_t> relu_forward(LayerContext& ctx, std::uint32_t layer, std::span<const std::uint64_t> x) {
  sync_marker(ctx, net::MsgTag::kRelu, layer, x.size());
  return chunked(ctx, x, [&](std::span<const std::uint64_t> part) {
    const auto d = gadgets::positive(ctx.gadgets, part, ctx.ring.bits);
    return gadgets::mux(ctx.gadgets, d, part, ctx.ring.bits);
  });
}

std::vector<std::uint64_t> avgpool_forward(LayerContext& ctx, const model::LayerSpec& l, std::uint32_t layer,
                                           const Shape& in_shape, std::span<const std::uint64_t> x,
                                           std::size_t batch) {
  if (in_shape.size() != 3 || in_shape[1] % l.pool_h || in_shape[2] % l.pool_w)
    fail(ErrorCode::kShapeMismatch, "pool window does not divide the feature map");
  const auto sums = model::pool_sum(l, in_shape, x, batch, ctx.ring);
  sync_marker(ctx, net::MsgTag::kPool, layer, sums.size());
  return chunked(ctx, sums, [&](std::span<const std::uint64_t> part) {
    return gadgets::divide_public(ctx.gadgets, part, l.pool_h * l.pool_w, ctx.ring.bits);
  });
}

std::vector<std::uint64_t> add_skip_forward(const LayerContext& ctx, std::span<const std::uint64_t> x,
                                            std::span<const std::uint64_t> skip) {
  if (x.size() != skip.size()) fail(ErrorCode::kShapeMismatch, "skip connection size mismatch");
  std::vector<std::uint64_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] + skip[i]) & ctx.ring.mask();
  return out;
}

}  // namespace pinfer::layers
