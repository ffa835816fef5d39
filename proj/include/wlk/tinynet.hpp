#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wlk/heatmap.hpp"

namespace wlk {

/// Architecture hyper-parameters. Level k of the pyramid has stride
/// strides[k]; the encoder halves resolution once per stage, so strides must
/// be 2, 4, 8, ... (consecutive powers of two starting at 2).
struct ModelConfig {
  std::uint32_t input_size = 128;
  std::uint32_t base_channels = 16;
  std::vector<std::uint32_t> strides{2, 4, 8, 16};
  std::uint64_t seed = 0;

  void check() const;
  std::size_t levels() const noexcept { return strides.size(); }
  std::size_t level_size(std::size_t k) const { return input_size / strides.at(k); }
  /// Encoder output channels at stage s.
  std::size_t stage_channels(std::size_t s) const noexcept;

  bool operator==(const ModelConfig&) const = default;
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t numel() const noexcept { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

/// Per-level probability maps, finest level first.
struct PyramidOutput {
  std::vector<Heatmap> maps;
};

/// C x H x W activations, channel-major.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0f) {}

  std::size_t plane() const noexcept { return height * width; }
  float* channel(std::size_t c) noexcept { return data.data() + c * plane(); }
  const float* channel(std::size_t c) const noexcept { return data.data() + c * plane(); }
};

/// Activations retained by forward() for the reverse pass.
struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<FeatureMap> stage_inputs;  // image, then each pooled encoder output
  std::vector<FeatureMap> pre_activations;
  std::vector<FeatureMap> pyramid;       // top-down features per level
  std::vector<Heatmap> probabilities;
};

/// Per-image standardized input, an encoder of 3x3 conv + leaky-ReLU + 2x2
/// average-pool stages, an FPN-style top-down path (1x1 laterals, nearest 2x
/// upsampling, addition) and a 1x1 conv + sigmoid head per level.
class TinyNet {
 public:
  explicit TinyNet(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }

  std::span<const Tensor> parameters() const noexcept { return params_; }
  /// Any access through this invalidates outstanding forward caches.
  std::span<Tensor> mutable_parameters();
  const Tensor& parameter(std::string_view name) const;
  Tensor& mutable_parameter(std::string_view name);
  std::size_t parameter_count() const noexcept;

  std::uint64_t version() const noexcept { return version_; }

  /// Image must be input_size x input_size. Deterministic.
  PyramidOutput forward(const Heatmap& image, ForwardCache* cache = nullptr) const;

  /// Gradients of a loss with respect to every parameter, given dLoss/dp for
  /// each level's probability map. Throws ContractError on a stale cache.
  std::vector<Tensor> backward(const ForwardCache& cache,
                               std::span<const Heatmap> level_grads) const;

  std::vector<Tensor> zero_gradients() const;

  std::vector<std::uint8_t> encode() const;
  static TinyNet decode(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static TinyNet load(const std::filesystem::path& path);

 private:
  enum Slot { kEncW, kEncB, kLatW, kLatB, kHeadW, kHeadB, kSlots };
  const Tensor& slot(std::size_t level, Slot s) const { return params_[level * kSlots + s]; }
  void touch();

  ModelConfig config_;
  std::vector<Tensor> params_;
  std::uint64_t version_ = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam with decoupled weight decay (w -= lr * wd * w).
/// Throws NumericError if any gradient is non-finite; weights are untouched
/// in that case.
void adam_step(std::span<Tensor> weights, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options);

/// Bilinearly upsamples every level to the finest level's grid and averages.
Heatmap merge_pyramid(const PyramidOutput& out);

/// Bilinear resize of a square map with half-pixel-center alignment.
Heatmap upsample_bilinear(const Heatmap& map, std::size_t rows, std::size_t cols);

}  // namespace wlk
