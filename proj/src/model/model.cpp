#include <sodium.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pinfer/model/model.hpp"
#include "pinfer/model/reference.hpp"

namespace pinfer::model {

namespace {

using json = nlohmann::json;

constexpr char kModelMagic[8] = {'P', 'I', 'N', 'F', 'M', 'O', 'D', 'L'};
constexpr char kTensorMagic[8] = {'P', 'I', 'N', 'F', 'T', 'N', 'S', 'R'};
constexpr std::size_t kHashSize = crypto_hash_sha256_BYTES;

void append_hash(Bytes& out) {
  std::uint8_t h[kHashSize];
  crypto_hash_sha256(h, out.data(), out.size());
  out.insert(out.end(), h, h + kHashSize);
}

std::span<const std::uint8_t> check_hash(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 + kHashSize) fail(ErrorCode::kChecksum, "file too short");
  const auto body = bytes.first(bytes.size() - kHashSize);
  std::uint8_t h[kHashSize];
  crypto_hash_sha256(h, body.data(), body.size());
  if (sodium_memcmp(h, bytes.data() + body.size(), kHashSize) != 0) fail(ErrorCode::kChecksum, "checksum mismatch");
  return body;
}

std::size_t product(const Shape& s) { return shape_size(s); }

std::string fmt_shape(const Shape& s) { return shape_string(s); }

}  // namespace

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kFc: return "fc";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kAddSkip: return "add_skip";
  }
  return "?";
}

LayerKind parse_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::kFc, LayerKind::kConv2d, LayerKind::kBatchNorm, LayerKind::kRelu,
                      LayerKind::kAvgPool, LayerKind::kAddSkip})
    if (s == kind_name(k)) return k;
  fail(ErrorCode::kModelFormat, "unknown layer kind '" + s + "'");
}

std::string ValidationReport::str() const {
  std::ostringstream os;
  for (const auto& i : issues) {
    if (i.layer >= 0)
      os << "layer " << i.layer << ": ";
    else
      os << "model: ";
    os << i.message << "\n";
  }
  return os.str();
}

ValidationReport validate_graph(const ModelSpec& m, bool require_weights) {
  ValidationReport r;
  auto issue = [&](int layer, std::string msg) { r.issues.push_back({layer, std::move(msg)}); };
  if (m.ring.frac < 2 || m.ring.frac >= m.ring.bits || m.ring.bits > 64) issue(-1, "invalid ring configuration");
  if (m.input_shape.empty() || product(m.input_shape) == 0) issue(-1, "empty input shape");
  if (m.layers.empty()) issue(-1, "model has no layers");

  Shape cur = m.input_shape;
  bool known = !m.input_shape.empty();
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    const int li = static_cast<int>(i);
    auto expect_size = [&](const std::vector<std::uint64_t>& v, std::size_t n, const char* what) {
      if (!require_weights && v.empty()) return;
      if (v.size() != n)
        issue(li, std::string(what) + " has " + std::to_string(v.size()) + " words, expected " + std::to_string(n));
    };
    if (!l.has_weights() && (!l.weights.empty() || !l.bias.empty())) issue(li, "unexpected weights");
    for (auto w : l.weights)
      if (!m.ring.contains(w)) {
        issue(li, "weight word outside the ring");
        break;
      }
    for (auto w : l.bias)
      if (!m.ring.contains(w)) {
        issue(li, "bias word outside the ring");
        break;
      }

    switch (l.kind) {
      case LayerKind::kFc: {
        if (l.in_features == 0 || l.out_features == 0) issue(li, "fc dimensions must be positive");
        if (known && product(cur) != l.in_features)
          issue(li, "fc expects " + std::to_string(l.in_features) + " inputs but receives " + fmt_shape(cur));
        expect_size(l.weights, l.in_features * l.out_features, "fc weights");
        expect_size(l.bias, l.out_features, "fc bias");
        cur = {l.out_features};
        known = true;
        break;
      }
      case LayerKind::kConv2d: {
        if (l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0 || l.out_channels == 0 || l.in_channels == 0) {
          issue(li, "conv2d geometry must be positive");
          known = false;
          break;
        }
        expect_size(l.weights, l.out_channels * l.in_channels * l.kernel_h * l.kernel_w, "conv2d weights");
        expect_size(l.bias, l.out_channels, "conv2d bias");
        if (!known) break;
        if (cur.size() != 3) {
          issue(li, "conv2d needs a CxHxW input, got " + fmt_shape(cur));
          known = false;
          break;
        }
        if (cur[0] != l.in_channels)
          issue(li, "conv2d expects " + std::to_string(l.in_channels) + " channels, got " + std::to_string(cur[0]));
        const std::size_t H = cur[1] + 2 * l.padding, W = cur[2] + 2 * l.padding;
        if (H < l.kernel_h || W < l.kernel_w) {
          issue(li, "conv2d kernel larger than padded input");
          known = false;
          break;
        }
        cur = {l.out_channels, (H - l.kernel_h) / l.stride + 1, (W - l.kernel_w) / l.stride + 1};
        break;
      }
      case LayerKind::kBatchNorm: {
        if (!known) break;
        const std::size_t c = bn_channels(cur);
        expect_size(l.weights, c, "batchnorm scale");
        expect_size(l.bias, c, "batchnorm shift");
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kAvgPool: {
        if (l.pool_h == 0 || l.pool_w == 0) {
          issue(li, "avgpool window must be positive");
          known = false;
          break;
        }
        if (!known) break;
        if (cur.size() != 3) {
          issue(li, "avgpool needs a CxHxW input, got " + fmt_shape(cur));
          known = false;
          break;
        }
        if (cur[1] % l.pool_h != 0 || cur[2] % l.pool_w != 0)
          issue(li, "avgpool " + std::to_string(l.pool_h) + "x" + std::to_string(l.pool_w) +
                        " does not divide the " + std::to_string(cur[1]) + "x" + std::to_string(cur[2]) + " map");
        cur = {cur[0], cur[1] / l.pool_h, cur[2] / l.pool_w};
        break;
      }
      case LayerKind::kAddSkip: {
        if (l.skip_from < -1 || l.skip_from >= li) {
          issue(li, "add_skip source " + std::to_string(l.skip_from) + " is not an earlier layer");
          break;
        }
        if (!known) break;
        const Shape& src = l.skip_from < 0 ? m.input_shape : r.shapes[static_cast<std::size_t>(l.skip_from)];
        if (src != cur) issue(li, "add_skip shapes differ: " + fmt_shape(src) + " vs " + fmt_shape(cur));
        break;
      }
    }
    r.shapes.push_back(known ? cur : Shape{});
  }
  return r;
}

std::vector<Shape> layer_shapes(const ModelSpec& m, bool require_weights) {
  auto r = validate_graph(m, require_weights);
  if (!r.ok()) fail(ErrorCode::kValidation, "invalid model graph:\n" + r.str());
  return r.shapes;
}

Shape output_shape(const ModelSpec& m) {
  auto s = layer_shapes(m);
  return s.back();
}

nlohmann::json architecture_json(const ModelSpec& m) {
  json h;
  h["name"] = m.name;
  h["input_shape"] = m.input_shape;
  h["ring"] = {{"bits", m.ring.bits}, {"frac", m.ring.frac}};
  json layers = json::array();
  for (const auto& l : m.layers) {
    json j;
    j["kind"] = kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::kFc:
        j["in_features"] = l.in_features;
        j["out_features"] = l.out_features;
        break;
      case LayerKind::kConv2d:
        j["in_channels"] = l.in_channels;
        j["out_channels"] = l.out_channels;
        j["kernel"] = {l.kernel_h, l.kernel_w};
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        break;
      case LayerKind::kAvgPool:
        j["kernel"] = {l.pool_h, l.pool_w};
        break;
      case LayerKind::kAddSkip:
        j["from"] = l.skip_from;
        break;
      default:
        break;
    }
    if (l.has_weights()) {
      j["weights"] = l.weights.size();
      j["bias"] = l.bias.size();
    }
    layers.push_back(std::move(j));
  }
  h["layers"] = std::move(layers);
  return h;
}

ModelSpec architecture_from_json(const nlohmann::json& h) {
  ModelSpec m;
  try {
    m.name = h.at("name").get<std::string>();
    m.input_shape = h.at("input_shape").get<Shape>();
    m.ring = RingConfig::make(h.at("ring").at("bits").get<unsigned>(), h.at("ring").at("frac").get<unsigned>());
    for (const auto& j : h.at("layers")) {
      LayerSpec l;
      l.kind = parse_kind(j.at("kind").get<std::string>());
      switch (l.kind) {
        case LayerKind::kFc:
          l.in_features = j.at("in_features").get<std::size_t>();
          l.out_features = j.at("out_features").get<std::size_t>();
          break;
        case LayerKind::kConv2d:
          l.in_channels = j.at("in_channels").get<std::size_t>();
          l.out_channels = j.at("out_channels").get<std::size_t>();
          l.kernel_h = j.at("kernel").at(0).get<std::size_t>();
          l.kernel_w = j.at("kernel").at(1).get<std::size_t>();
          l.stride = j.at("stride").get<std::size_t>();
          l.padding = j.at("padding").get<std::size_t>();
          break;
        case LayerKind::kAvgPool:
          l.pool_h = j.at("kernel").at(0).get<std::size_t>();
          l.pool_w = j.at("kernel").at(1).get<std::size_t>();
          break;
        case LayerKind::kAddSkip:
          l.skip_from = j.at("from").get<int>();
          break;
        default:
          break;
      }
      if (l.has_weights()) {
        l.weights.resize(j.at("weights").get<std::size_t>());
        l.bias.resize(j.at("bias").get<std::size_t>());
      }
      m.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kModelFormat, std::string("bad model header: ") + e.what());
  }
  return m;
}

Bytes save_model(const ModelSpec& m) {
  const std::string header = architecture_json(m).dump();

  ByteWriter w;
  w.raw(std::string_view(kModelMagic, 8));
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.raw(header);
  for (const auto& l : m.layers) {
    for (auto v : l.weights) w.u64(v);
    for (auto v : l.bias) w.u64(v);
  }
  Bytes out = std::move(w).take();
  append_hash(out);
  return out;
}

ModelSpec architecture_only(const ModelSpec& m) {
  ModelSpec out = m;
  for (auto& l : out.layers) {
    l.weights.clear();
    l.bias.clear();
  }
  return out;
}

ModelSpec load_model(std::span<const std::uint8_t> bytes) {
  const auto body = check_hash(bytes);
  ByteReader r(body);
  const auto magic = r.raw(8);
  if (!std::equal(magic.begin(), magic.end(), kModelMagic)) fail(ErrorCode::kModelFormat, "not a model file");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    fail(ErrorCode::kVersion, "model version " + std::to_string(version) + " unsupported");
  const auto header_bytes = r.raw(r.u32());
  ModelSpec m;
  try {
    m = architecture_from_json(json::parse(header_bytes.begin(), header_bytes.end()));
  } catch (const json::exception& e) {
    fail(ErrorCode::kModelFormat, std::string("bad model header: ") + e.what());
  }
  std::size_t words = 0;
  for (const auto& l : m.layers) words += l.weights.size() + l.bias.size();
  if (r.remaining() != words * 8) fail(ErrorCode::kModelFormat, "weight section size does not match header");
  for (auto& l : m.layers) {
    for (auto& v : l.weights) v = r.u64();
    for (auto& v : l.bias) v = r.u64();
  }
  const auto report = validate_graph(m);
  if (!report.ok()) fail(ErrorCode::kValidation, "invalid model graph:\n" + report.str());
  return m;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::kIo, "short write to " + path.string());
}

void save_model_file(const ModelSpec& m, const std::filesystem::path& path) { write_file(path, save_model(m)); }
ModelSpec load_model_file(const std::filesystem::path& path) { return load_model(read_file(path)); }

FoldedBn batchnorm_fold(std::span<const double> gamma, std::span<const double> beta, std::span<const double> mean,
                        std::span<const double> sigma) {
  const std::size_t c = gamma.size();
  if (beta.size() != c || mean.size() != c || sigma.size() != c)
    fail(ErrorCode::kShapeMismatch, "batchnorm parameter lengths differ");
  FoldedBn out{std::vector<double>(c), std::vector<double>(c)};
  for (std::size_t i = 0; i < c; ++i) {
    if (!(sigma[i] > 0)) fail(ErrorCode::kInvalidArgument, "batchnorm sigma must be positive");
    out.scale[i] = gamma[i] / sigma[i];
    out.shift[i] = beta[i] - mean[i] * gamma[i] / sigma[i];
  }
  return out;
}

std::vector<std::uint64_t> quantize(std::span<const double> v, const RingConfig& cfg) {
  std::vector<std::uint64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = encode_fixed(v[i], cfg).value;
  return out;
}

LayerSpec batchnorm_layer(const FoldedBn& bn, const RingConfig& cfg) {
  LayerSpec l;
  l.kind = LayerKind::kBatchNorm;
  l.weights = quantize(bn.scale, cfg);
  l.bias = quantize(bn.shift, cfg);
  return l;
}

LayerSpec fc_layer(std::size_t in, std::size_t out, std::span<const double> w, std::span<const double> b,
                   const RingConfig& cfg) {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.in_features = in;
  l.out_features = out;
  l.weights = quantize(w, cfg);
  l.bias = quantize(b, cfg);
  return l;
}

LayerSpec conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, std::size_t padding,
                     std::span<const double> w, std::span<const double> b, const RingConfig& cfg) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel_h = l.kernel_w = k;
  l.stride = stride;
  l.padding = padding;
  l.weights = quantize(w, cfg);
  l.bias = quantize(b, cfg);
  return l;
}

LayerSpec relu_layer() { return LayerSpec{}; }

LayerSpec avgpool_layer(std::size_t kh, std::size_t kw) {
  LayerSpec l;
  l.kind = LayerKind::kAvgPool;
  l.pool_h = kh;
  l.pool_w = kw;
  return l;
}

LayerSpec add_skip_layer(int from) {
  LayerSpec l;
  l.kind = LayerKind::kAddSkip;
  l.skip_from = from;
  return l;
}

namespace {

std::vector<double> uniform(Prng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = (static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * scale;
  return v;
}

LayerSpec random_fc(Prng& rng, std::size_t in, std::size_t out, const RingConfig& cfg) {
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  return fc_layer(in, out, uniform(rng, in * out, s), uniform(rng, out, s), cfg);
}

LayerSpec random_conv(Prng& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t pad,
                      const RingConfig& cfg) {
  const double s = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  return conv_layer(in, out, k, 1, pad, uniform(rng, out * in * k * k, s), uniform(rng, out, s), cfg);
}

}  // namespace

ModelSpec make_mlp(std::uint64_t seed, const RingConfig& cfg) {
  Prng rng(Prng::derive_seed(seed, "fixture/mlp"));
  ModelSpec m{"mlp", {784}, {}, cfg};
  m.layers.push_back(random_fc(rng, 784, 64, cfg));
  m.layers.push_back(relu_layer());
  m.layers.push_back(random_fc(rng, 64, 10, cfg));
  return m;
}

ModelSpec make_lenet5(std::uint64_t seed, const RingConfig& cfg) {
  Prng rng(Prng::derive_seed(seed, "fixture/lenet5"));
  ModelSpec m{"lenet5", {1, 28, 28}, {}, cfg};
  m.layers.push_back(random_conv(rng, 1, 6, 5, 2, cfg));
  m.layers.push_back(relu_layer());
  m.layers.push_back(avgpool_layer(2, 2));
  m.layers.push_back(random_conv(rng, 6, 16, 5, 0, cfg));
  m.layers.push_back(relu_layer());
  m.layers.push_back(avgpool_layer(2, 2));
  m.layers.push_back(random_fc(rng, 400, 120, cfg));
  m.layers.push_back(relu_layer());
  m.layers.push_back(random_fc(rng, 120, 84, cfg));
  m.layers.push_back(relu_layer());
  m.layers.push_back(random_fc(rng, 84, 10, cfg));
  return m;
}

ModelSpec make_identity(std::size_t n, const RingConfig& cfg) {
  std::vector<double> w(n * n, 0.0), b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  ModelSpec m{"identity", {n}, {}, cfg};
  m.layers.push_back(fc_layer(n, n, w, b, cfg));
  return m;
}

Bytes save_tensor(const FixedTensor& t) {
  ByteWriter w;
  w.raw(std::string_view(kTensorMagic, 8));
  w.u32(static_cast<std::uint32_t>(t.shape().size()));
  for (auto d : t.shape()) w.u64(d);
  w.u32(t.config().bits);
  w.u32(t.config().frac);
  for (auto v : t.words()) w.u64(v);
  Bytes out = std::move(w).take();
  append_hash(out);
  return out;
}

FixedTensor load_tensor(std::span<const std::uint8_t> bytes) {
  const auto body = check_hash(bytes);
  ByteReader r(body);
  const auto magic = r.raw(8);
  if (!std::equal(magic.begin(), magic.end(), kTensorMagic)) fail(ErrorCode::kDecode, "not a tensor file");
  const std::uint32_t rank = r.u32();
  if (rank > 8) fail(ErrorCode::kDecode, "tensor rank too large");
  Shape shape(rank);
  for (auto& d : shape) d = r.u64();
  const unsigned bits = r.u32(), frac = r.u32();
  const RingConfig cfg = RingConfig::make(bits, frac);
  const std::size_t n = shape_size(shape);
  if (r.remaining() != n * 8) fail(ErrorCode::kDecode, "tensor payload size mismatch");
  std::vector<std::uint64_t> words(n);
  for (auto& v : words) {
    v = r.u64();
    if (!cfg.contains(v)) fail(ErrorCode::kDecode, "tensor word outside the ring");
  }
  return FixedTensor(std::move(shape), std::move(words), cfg);
}

void save_tensor_file(const FixedTensor& t, const std::filesystem::path& path) { write_file(path, save_tensor(t)); }

FixedTensor parse_tensor_text(const std::string& text, const RingConfig& cfg) {
  std::istringstream in(text);
  std::string line;
  Shape shape;
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    if (first == "shape") {
      std::size_t d;
      shape.clear();
      while (ls >> d) shape.push_back(d);
      continue;
    }
    std::istringstream all(line);
    std::string tok;
    while (all >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorCode::kDecode, "bad tensor value '" + tok + "'");
      }
    }
  }
  if (shape.empty()) shape = {values.size()};
  if (shape_size(shape) != values.size())
    fail(ErrorCode::kShapeMismatch, "tensor text holds " + std::to_string(values.size()) + " values for shape " +
                                        shape_string(shape));
  return FixedTensor::from_reals(shape, values, cfg);
}

FixedTensor load_tensor_file(const std::filesystem::path& path, const RingConfig& cfg) {
  Bytes b = read_file(path);
  if (b.size() >= 8 && std::equal(b.begin(), b.begin() + 8, kTensorMagic)) return load_tensor(b);
  return parse_tensor_text(std::string(b.begin(), b.end()), cfg);
}

}  // namespace pinfer::model
