#include "wlk/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wlk/error.hpp"

namespace wlk {

Heatmap flip_horizontal(const Heatmap& image) {
  Heatmap out(image.rows, image.cols);
  for (std::size_t r = 0; r < image.rows; ++r) {
    for (std::size_t c = 0; c < image.cols; ++c) out(r, c) = image(r, image.cols - 1 - c);
  }
  return out;
}

PointAnnotation flip_horizontal(PointAnnotation p, std::size_t size) {
  return {static_cast<double>(size) - 1.0 - p.x, p.y};
}

PointAnnotation rotate_point(PointAnnotation p, double radians, std::size_t size) {
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  const double cs = std::cos(radians);
  const double sn = std::sin(radians);
  const double dx = p.x - center;
  const double dy = p.y - center;
  return {center + cs * dx - sn * dy, center + sn * dx + cs * dy};
}

Heatmap rotate_image(const Heatmap& image, double radians) {
  require(image.rows == image.cols, "rotate_image: image must be square");
  const std::size_t n = image.rows;
  Heatmap out(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      // Inverse-map each output pixel into the source.
      const auto src = rotate_point({static_cast<double>(c), static_cast<double>(r)}, -radians, n);
      const auto sx = static_cast<std::size_t>(std::clamp(std::round(src.x), 0.0, n - 1.0));
      const auto sy = static_cast<std::size_t>(std::clamp(std::round(src.y), 0.0, n - 1.0));
      out(r, c) = image(sy, sx);
    }
  }
  return out;
}

Augmented augment(const Heatmap& image, std::span<const PointAnnotation> points, Rng& rng,
                  const AugmentFlags& flags, const AugmentOptions& options) {
  require(image.rows == image.cols, "augment: image must be square");
  const std::size_t n = image.rows;
  Augmented out{image, {points.begin(), points.end()}};

  if (flags.hflip && rng.bernoulli(options.flip_probability)) {
    out.image = flip_horizontal(out.image);
    for (auto& p : out.points) p = flip_horizontal(p, n);
  }

  if (flags.rotate) {
    const double deg = rng.uniform(-options.max_rotation_deg, options.max_rotation_deg);
    const double rad = deg * std::numbers::pi / 180.0;
    out.image = rotate_image(out.image, rad);
    std::vector<PointAnnotation> kept;
    for (const auto& p : out.points) {
      const auto q = rotate_point(p, rad, n);
      if (q.x >= 0.0 && q.y >= 0.0 && q.x < n && q.y < n) kept.push_back(q);
    }
    out.points = std::move(kept);
  }

  if (flags.contrast_jitter) {
    const double scale = rng.uniform(options.contrast_low, options.contrast_high);
    double mean = 0.0;
    for (double v : out.image.values) mean += v;
    mean /= static_cast<double>(out.image.size());
    for (auto& v : out.image.values) v = mean + scale * (v - mean);
  }

  if (flags.intensity_jitter) {
    const double shift = rng.uniform(-options.max_intensity_shift, options.max_intensity_shift);
    for (auto& v : out.image.values) v += shift;
  }

  if (flags.contrast_jitter || flags.intensity_jitter) {
    for (auto& v : out.image.values) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace wlk
