#pragma once

#include <span>
#include <vector>

#include "wlk/annotations.hpp"
#include "wlk/heatmap.hpp"
#include "wlk/rng.hpp"

namespace wlk {

struct AugmentFlags {
  bool hflip = true;
  bool rotate = true;
  bool intensity_jitter = true;
  bool contrast_jitter = true;

  bool any() const noexcept { return hflip || rotate || intensity_jitter || contrast_jitter; }
};

// Magnitudes are conventions chosen for small synthetic images; none of them
// are pinned by the method itself.
struct AugmentOptions {
  double flip_probability = 0.5;
  double max_rotation_deg = 10.0;
  double max_intensity_shift = 0.1;
  double contrast_low = 0.9;
  double contrast_high = 1.1;
};

struct Augmented {
  Heatmap image;
  std::vector<PointAnnotation> points;
};

/// Random horizontal flip, rotation about the image center (nearest
/// neighbour, edge replicate), contrast scaling about the mean and an
/// intensity shift, in that order. Points follow the geometric transforms;
/// points rotated out of the frame are dropped. Output is clamped to [0, 1].
Augmented augment(const Heatmap& image, std::span<const PointAnnotation> points, Rng& rng,
                  const AugmentFlags& flags, const AugmentOptions& options = {});

Heatmap flip_horizontal(const Heatmap& image);
PointAnnotation flip_horizontal(PointAnnotation p, std::size_t size);

Heatmap rotate_image(const Heatmap& image, double radians);
PointAnnotation rotate_point(PointAnnotation p, double radians, std::size_t size);

}  // namespace wlk
