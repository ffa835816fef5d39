#pragma once

#include <cstddef>
#include <span>

#include "wlk/annotations.hpp"
#include "wlk/heatmap.hpp"

namespace wlk {

/// Radii and softness of the confidence bounds, in input-space pixels.
/// Defaults are the desk-scale (128 px input) equivalents of 50/200/2 at
/// 1024 px.
struct BoundParams {
  double r_lower = 6.25;
  double r_upper = 25.0;
  double tau = 0.25;
  double disk_radius = 6.25;

  /// Throws ContractError unless r_lower <= r_upper, tau > 0, disk_radius > 0.
  void check() const;

  bool operator==(const BoundParams&) const = default;
};

struct BoundPair {
  Heatmap lower;
  Heatmap upper;
  BoundParams params;
};

/// Logistic function with its argument clamped to [-40, 40].
double sigmoid(double x) noexcept;

/// Input-space coordinate of the center of grid cell `index` when each cell
/// spans `scale` input pixels. Cell j covers input pixels [j*scale, (j+1)*scale).
double cell_center(std::size_t index, double scale) noexcept;

/// Grid cell containing input-space coordinate `coord`, clamped to [0, n).
std::size_t cell_containing(double coord, double scale, std::size_t n) noexcept;

/// Per-cell minimum Euclidean distance (input-space pixels) to any point.
Heatmap min_distance_field(std::span<const PointAnnotation> points, std::size_t rows,
                           std::size_t cols, double scale);

/// lower = sigmoid((r_lower - Dmin) / tau), upper likewise with r_upper.
/// With no points both bounds are identically zero.
BoundPair make_bounds(std::span<const PointAnnotation> points, std::size_t rows,
                      std::size_t cols, double scale, const BoundParams& params);

/// 1 where Dmin <= radius, else 0.
Heatmap disk_mask(std::span<const PointAnnotation> points, std::size_t rows, std::size_t cols,
                  double scale, double radius);

}  // namespace wlk
