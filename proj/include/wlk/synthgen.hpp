#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wlk/annotations.hpp"
#include "wlk/heatmap.hpp"
#include "wlk/rng.hpp"

namespace wlk {

/// Procedural stand-in for an annotated radiograph corpus: banded
/// background, thin jagged dark "cracks" (the findings) and smooth dark arcs
/// (distractors present in every image).
struct SynthConfig {
  std::uint32_t image_size = 128;
  std::size_t n_positive = 100;
  std::size_t n_negative = 100;
  std::size_t cracks_min = 1;
  std::size_t cracks_max = 3;
  double crack_length_min = 18.0;
  double crack_length_max = 36.0;
  double crack_contrast_min = 0.15;
  double crack_contrast_max = 0.35;
  std::size_t distractors_min = 1;
  std::size_t distractors_max = 2;
  double distractor_contrast_min = 0.10;
  double distractor_contrast_max = 0.30;
  std::size_t bands = 3;
  double band_amplitude = 0.12;
  double noise_sigma = 0.02;
  /// Annotate long cracks with two jittered points instead of the midpoint.
  bool split_points = false;
  std::uint64_t seed = 0;

  void check() const;
};

using Polyline = std::vector<PointAnnotation>;

struct SynthImage {
  Heatmap image;
  std::vector<PointAnnotation> points;
  std::vector<Polyline> cracks;
};

/// Distance from `p` to the nearest segment of `line`.
double distance_to_polyline(PointAnnotation p, const Polyline& line);

/// Draws one image; the crack count is uniform in [cracks_min, cracks_max].
SynthImage generate_image(Rng& rng, const SynthConfig& config);

/// Writes images/img_NNNN.pgm and manifest.json under `out_dir` and returns
/// the manifest. Positives come first; splits are 70/10/20 and stratified.
Dataset generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Split sizes for `n` records: round(0.7 n), round(0.1 n), remainder.
struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
SplitSizes split_sizes(std::size_t n);

}  // namespace wlk
