#include "wlk/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wlk/error.hpp"

namespace wlk {

void BoundParams::check() const {
  require(std::isfinite(r_lower) && std::isfinite(r_upper) && r_lower <= r_upper,
          "bound params: r_lower must not exceed r_upper");
  require(tau > 0.0 && std::isfinite(tau), "bound params: tau must be positive");
  require(disk_radius > 0.0 && std::isfinite(disk_radius),
          "bound params: disk_radius must be positive");
}

double sigmoid(double x) noexcept {
  x = std::clamp(x, -40.0, 40.0);
  return 1.0 / (1.0 + std::exp(-x));
}

double cell_center(std::size_t index, double scale) noexcept {
  return static_cast<double>(index) * scale + 0.5 * (scale - 1.0);
}

std::size_t cell_containing(double coord, double scale, std::size_t n) noexcept {
  const double j = std::floor((coord + 0.5) / scale);
  if (!(j > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(j), n - 1);
}

Heatmap min_distance_field(std::span<const PointAnnotation> points, std::size_t rows,
                           std::size_t cols, double scale) {
  require(!points.empty(), "min_distance_field: no points");
  require(scale > 0.0, "min_distance_field: scale must be positive");
  Heatmap field(rows, cols, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < rows; ++i) {
    const double cy = cell_center(i, scale);
    for (std::size_t j = 0; j < cols; ++j) {
      const double cx = cell_center(j, scale);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : points) best = std::min(best, std::hypot(cx - p.x, cy - p.y));
      field(i, j) = best;
    }
  }
  return field;
}

BoundPair make_bounds(std::span<const PointAnnotation> points, std::size_t rows,
                      std::size_t cols, double scale, const BoundParams& params) {
  params.check();
  require(rows > 0 && cols > 0, "make_bounds: empty grid");
  BoundPair out{Heatmap(rows, cols), Heatmap(rows, cols), params};
  if (points.empty()) return out;

  // sigmoid is decreasing in distance, so max over points == value at Dmin.
  const Heatmap dmin = min_distance_field(points, rows, cols, scale);
  for (std::size_t i = 0; i < dmin.size(); ++i) {
    out.lower.values[i] = sigmoid((params.r_lower - dmin.values[i]) / params.tau);
    out.upper.values[i] = sigmoid((params.r_upper - dmin.values[i]) / params.tau);
  }
  return out;
}

Heatmap disk_mask(std::span<const PointAnnotation> points, std::size_t rows, std::size_t cols,
                  double scale, double radius) {
  require(radius > 0.0, "disk_mask: radius must be positive");
  Heatmap mask(rows, cols);
  if (points.empty()) return mask;
  const Heatmap dmin = min_distance_field(points, rows, cols, scale);
  for (std::size_t i = 0; i < dmin.size(); ++i) mask.values[i] = dmin.values[i] <= radius ? 1.0 : 0.0;
  return mask;
}

}  // namespace wlk
