#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinfer/common/bytes.hpp"
#include "pinfer/common/prng.hpp"
#include "pinfer/ring.hpp"

namespace pinfer::model {

enum class LayerKind { kFc, kConv2d, kBatchNorm, kRelu, kAvgPool, kAddSkip };

const char* kind_name(LayerKind k);
LayerKind parse_kind(const std::string& s);

// Linear layers compute y = trunc(W x + (b << frac)): weights and biases are
// ring words at scale 2^frac and the product is truncated once.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  // fc: in_features -> out_features. The input is flattened.
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // conv2d: out_channels x in_channels x kernel_h x kernel_w weights.
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // avgpool: non-overlapping pool_h x pool_w windows.
  std::size_t pool_h = 0;
  std::size_t pool_w = 0;
  // add_skip: adds the output of layer skip_from; -1 is the model input.
  int skip_from = -1;
  // batchnorm: one scale and one shift per channel, already folded.
  std::vector<std::uint64_t> weights;
  std::vector<std::uint64_t> bias;

  bool has_weights() const {
    return kind == LayerKind::kFc || kind == LayerKind::kConv2d || kind == LayerKind::kBatchNorm;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  Shape input_shape;  // per sample, without the batch dimension
  std::vector<LayerSpec> layers;
  RingConfig ring;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ValidationIssue {
  int layer = -1;  // -1 refers to the model as a whole
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::vector<Shape> shapes;  // output shape of each layer when inferable
  bool ok() const { return issues.empty(); }
  std::string str() const;
};

// Architecture-only models (no weights) validate with require_weights off.
ValidationReport validate_graph(const ModelSpec& m, bool require_weights = true);
// Throws kValidation with the full report when the graph is invalid.
std::vector<Shape> layer_shapes(const ModelSpec& m, bool require_weights = true);
Shape output_shape(const ModelSpec& m);

inline constexpr std::uint32_t kModelVersion = 1;

// Container: "PINFMODL" | u32 version | u32 header length | JSON header |
// little-endian u64 weight and bias words in layer order | SHA-256 of all
// preceding bytes.
Bytes save_model(const ModelSpec& m);
ModelSpec load_model(std::span<const std::uint8_t> bytes);
// The JSON header alone: geometry plus weight counts, no weight values.
nlohmann::json architecture_json(const ModelSpec& m);
ModelSpec architecture_from_json(const nlohmann::json& h);
ModelSpec architecture_only(const ModelSpec& m);
void save_model_file(const ModelSpec& m, const std::filesystem::path& path);
ModelSpec load_model_file(const std::filesystem::path& path);

// Fixed-point reference engine. x is either one sample of input_shape or a
// batch [B, input_shape...]; the output keeps the same convention.
FixedTensor plaintext_infer(const ModelSpec& m, const FixedTensor& x);

// Folds y = W~ (x - mu) / sigma + b~ into y = W x + b in real arithmetic.
struct FoldedBn {
  std::vector<double> scale, shift;
};
FoldedBn batchnorm_fold(std::span<const double> gamma, std::span<const double> beta, std::span<const double> mean,
                        std::span<const double> sigma);
LayerSpec batchnorm_layer(const FoldedBn& bn, const RingConfig& cfg);

// Quantizes real weights at scale 2^frac.
std::vector<std::uint64_t> quantize(std::span<const double> v, const RingConfig& cfg);

LayerSpec fc_layer(std::size_t in, std::size_t out, std::span<const double> w, std::span<const double> b,
                   const RingConfig& cfg);
LayerSpec conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, std::size_t padding,
                     std::span<const double> w, std::span<const double> b, const RingConfig& cfg);
LayerSpec relu_layer();
LayerSpec avgpool_layer(std::size_t kh, std::size_t kw);
LayerSpec add_skip_layer(int from);

// Hand-built fixtures with seeded uniform weights scaled by 1/sqrt(fan_in).
ModelSpec make_mlp(std::uint64_t seed, const RingConfig& cfg = RingConfig{});
ModelSpec make_lenet5(std::uint64_t seed, const RingConfig& cfg = RingConfig{});
ModelSpec make_identity(std::size_t n, const RingConfig& cfg = RingConfig{});

// Tensor files: "PINFTNSR" | u32 rank | u64 dims | u32 bits | u32 frac |
// u64 words | SHA-256. The text form is an optional "shape d0 d1 ..." line
// followed by whitespace-separated real values.
Bytes save_tensor(const FixedTensor& t);
FixedTensor load_tensor(std::span<const std::uint8_t> bytes);
void save_tensor_file(const FixedTensor& t, const std::filesystem::path& path);
FixedTensor load_tensor_file(const std::filesystem::path& path, const RingConfig& cfg = RingConfig{});
FixedTensor parse_tensor_text(const std::string& text, const RingConfig& cfg);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

}  // namespace pinfer::model
