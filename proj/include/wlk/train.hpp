#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wlk/annotations.hpp"
#include "wlk/augment.hpp"
#include "wlk/supervision.hpp"
#include "wlk/tinynet.hpp"
#include "wlk/window_loss.hpp"

namespace wlk {

/// Optimization settings. The learning rate default targets the small
/// randomly-initialized network; 4e-5 is the value for a pretrained backbone.
struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 40;
  Divergence divergence = Divergence::kMse;
  BoundParams bounds;
  AugmentFlags augment;
  std::uint64_t seed = 0;

  void check() const;
};

/// An image already padded/resized to the model input, with its points in
/// input space.
struct Sample {
  Heatmap image;
  std::vector<PointAnnotation> points;
  bool positive = false;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auroc = 0.0;  // NaN when the validation split is single-class
  double val_loss = 0.0;   // mean pyramid Window Loss, unaugmented
};

struct Validation {
  double auroc = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  TinyNet best;
  std::vector<EpochLog> log;
  double initial_val_auroc = 0.0;
  std::size_t best_epoch = 0;
};

std::filesystem::path resolve_image_path(const ImageRecord& record,
                                         const std::filesystem::path& root);

Sample load_sample(const ImageRecord& record, const std::filesystem::path& root,
                   std::uint32_t input_size);
std::vector<Sample> load_samples(std::span<const ImageRecord* const> records,
                                 const std::filesystem::path& root, std::uint32_t input_size);

/// Bounds for every pyramid level, evaluated analytically on each level's grid.
std::vector<BoundPair> pyramid_bounds(std::span<const PointAnnotation> points,
                                      const ModelConfig& model, const BoundParams& params);

/// Merged (level-averaged) probability map for one input image.
Heatmap predict(const TinyNet& net, const Heatmap& image);

/// Image-level AUROC of max-response scores; NaN if only one class is present.
double validation_auroc(const TinyNet& net, std::span<const Sample> samples);

/// One optimizer step on `batch`: forward, pyramid Window Loss, backward,
/// Adam. Samples are augmented with `aug_rng` when flags are enabled.
/// Returns the mean total loss over the batch (before the update).
double train_step(TinyNet& net, AdamState& adam, std::span<const Sample* const> batch,
                  const TrainConfig& config, Rng& aug_rng);

/// AUROC and mean pyramid loss over `samples`, without augmentation.
Validation validate_epoch(const TinyNet& net, std::span<const Sample> samples, const TrainConfig& config);

/// Epoch ranking: higher AUROC (NaN lowest), then lower loss.
bool ranks_above(const Validation& a, const Validation& b);

/// Full loop with per-epoch validation; returns the weights of the best
/// epoch under `ranks_above` (first such epoch on exact ties).
TrainResult train(std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const ModelConfig& model, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// CSV with header `epoch,train_loss,val_auroc`.
std::string format_train_log(std::span<const EpochLog> log);

std::string format_number(double value);

}  // namespace wlk
