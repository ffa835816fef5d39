#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wlk/annotations.hpp"
#include "wlk/heatmap.hpp"
#include "wlk/supervision.hpp"

namespace wlk {

/// Axis-aligned box in grid cells, half-open: [x0, x1) x [y0, y1).
struct DetectionBox {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t x1 = 0;
  std::size_t y1 = 0;
  double score = 0.0;

  std::size_t area() const noexcept { return (x1 - x0) * (y1 - y0); }
  bool contains(std::size_t col, std::size_t row) const noexcept {
    return col >= x0 && col < x1 && row >= y0 && row < y1;
  }
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auroc = 0.0;
};

struct FrocPoint {
  double threshold = 0.0;
  double fp_per_image = 0.0;  // running maximum over higher thresholds
  double recall = 0.0;
  std::size_t fp_boxes = 0;   // raw false-positive box count at this threshold
  std::size_t recalled = 0;   // annotation points inside at least one box
};

inline constexpr double kFrocRates[] = {0.1, 0.2, 0.3, 0.4, 0.5};

struct FrocCurve {
  std::vector<FrocPoint> points;  // descending threshold
  std::size_t total_points = 0;
  std::size_t total_images = 0;
  double froc_score = 0.0;
  double recall_at_01 = 0.0;

  /// Best recall among operating points with fp_per_image <= rate; 0 if none.
  double recall_at(double rate) const noexcept;
};

/// Maximum response of the map. Throws ContractError on an empty map.
double image_score(const Heatmap& map);

/// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(equal).
/// Labels are 0/1. Throws ContractError if either class is absent.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Empirical ROC with one operating point per distinct score; `auroc` is the
/// trapezoidal area.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

/// 8-connected foreground components (value != 0) as flattened cell indices,
/// ordered by their first cell in raster order. Two-pass union-find labeling.
std::vector<std::vector<std::size_t>> connected_components(const Heatmap& mask);

/// Binarizes at value >= threshold and returns one tight box per component,
/// scored by the component's maximum.
std::vector<DetectionBox> boxes_from_map(const Heatmap& map, double threshold);

/// Distinct map values (evenly subsampled to at most `max_distinct`) merged
/// with the 0.05, 0.10, ..., 1.00 grid; sorted descending.
std::vector<double> sweep_thresholds(std::span<const Heatmap> maps, std::size_t max_distinct = 512);

struct ImageCounts {
  std::size_t fp_boxes = 0;
  std::size_t recalled = 0;
};

/// FP boxes and recalled points for one image at one threshold. `points` are
/// in input space; each map cell spans `scale` input pixels. A box is a false
/// positive when fewer than 10% of its cells fall inside the disk mask.
ImageCounts count_detections(const Heatmap& map, std::span<const PointAnnotation> points,
                             double scale, double disk_radius, double threshold);

/// FROC over a set of images. `points[i]` are input-space annotation points
/// of image i, and `input_size` is the model input side (map scale is
/// input_size / map.cols). Throws ContractError when there are no points.
FrocCurve froc(std::span<const Heatmap> maps,
               std::span<const std::vector<PointAnnotation>> points, std::uint32_t input_size,
               const BoundParams& params, std::span<const double> thresholds);

/// Convenience overload mapping record points into input space.
FrocCurve froc(std::span<const Heatmap> maps, std::span<const ImageRecord* const> records,
               std::uint32_t input_size, const BoundParams& params,
               std::span<const double> thresholds);

}  // namespace wlk
