#include "wlk/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <limits>
#include <numeric>

#include "wlk/error.hpp"

namespace wlk {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCrackWidth = 0.7;         // Gaussian profile sigma, pixels
constexpr double kJitterStep = 2.0;         // spacing of jagged vertices
constexpr double kJitterSigma = 0.7;
constexpr double kSplitJitterSigma = 3.0;
constexpr double kMargin = 10.0;

double segment_distance(PointAnnotation p, PointAnnotation a, PointAnnotation b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

PointAnnotation point_at_arclength(const Polyline& line, double s) {
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
    if (s <= seg && seg > 0.0) {
      const double t = s / seg;
      return {line[i - 1].x + t * (line[i].x - line[i - 1].x),
              line[i - 1].y + t * (line[i].y - line[i - 1].y)};
    }
    s -= seg;
  }
  return line.back();
}

double polyline_length(const Polyline& line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    total += std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
  }
  return total;
}

bool inside(const Polyline& line, double lo, double hi) {
  return std::all_of(line.begin(), line.end(), [&](const PointAnnotation& p) {
    return p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi;
  });
}

// 2-4 straight segments with random turns, then resampled with perpendicular
// jitter so the rendered crack is jagged.
Polyline make_crack(Rng& rng, const SynthConfig& cfg) {
  const double n = cfg.image_size;
  for (;;) {
    const auto segments = static_cast<std::size_t>(rng.uniform_int(2, 4));
    const double length = rng.uniform(cfg.crack_length_min, cfg.crack_length_max);
    Polyline base{{rng.uniform(kMargin, n - 1 - kMargin), rng.uniform(kMargin, n - 1 - kMargin)}};
    double heading = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t s = 0; s < segments; ++s) {
      if (s > 0) heading += rng.uniform(-0.9, 0.9);
      const double seg = length / static_cast<double>(segments);
      base.push_back({base.back().x + seg * std::cos(heading), base.back().y + seg * std::sin(heading)});
    }

    Polyline jagged{base.front()};
    for (std::size_t s = 1; s < base.size(); ++s) {
      const auto& a = base[s - 1];
      const auto& b = base[s];
      const double seg = std::hypot(b.x - a.x, b.y - a.y);
      const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(seg / kJitterStep)));
      const double nx = -(b.y - a.y) / seg;
      const double ny = (b.x - a.x) / seg;
      for (std::size_t k = 1; k <= steps; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(steps);
        const double off = k == steps ? 0.0 : std::clamp(rng.normal(0.0, kJitterSigma), -1.5, 1.5);
        jagged.push_back({a.x + t * (b.x - a.x) + off * nx, a.y + t * (b.y - a.y) + off * ny});
      }
    }
    if (inside(jagged, 2.0, n - 3.0)) return jagged;
  }
}

struct Arc {
  PointAnnotation center;
  double radius;
  double start;
  double sweep;
  double sigma;
  double contrast;
};

Arc make_distractor(Rng& rng, const SynthConfig& cfg) {
  const double n = cfg.image_size;
  Arc arc;
  arc.radius = rng.uniform(25.0, 70.0);
  const double length = rng.uniform(30.0, 60.0);
  arc.sweep = length / arc.radius;
  arc.start = rng.uniform(0.0, 2.0 * kPi);
  // Center chosen so the arc midpoint lands inside the frame.
  const double mid = arc.start + 0.5 * arc.sweep;
  const PointAnnotation mid_pt{rng.uniform(kMargin, n - 1 - kMargin), rng.uniform(kMargin, n - 1 - kMargin)};
  arc.center = {mid_pt.x - arc.radius * std::cos(mid), mid_pt.y - arc.radius * std::sin(mid)};
  arc.sigma = rng.uniform(1.8, 3.0);
  arc.contrast = rng.uniform(cfg.distractor_contrast_min, cfg.distractor_contrast_max);
  return arc;
}

double arc_distance(PointAnnotation p, const Arc& arc) {
  const double dx = p.x - arc.center.x;
  const double dy = p.y - arc.center.y;
  double theta = std::atan2(dy, dx) - arc.start;
  theta = std::fmod(theta, 2.0 * kPi);
  if (theta < 0.0) theta += 2.0 * kPi;
  if (theta <= arc.sweep) return std::abs(std::hypot(dx, dy) - arc.radius);
  auto end_point = [&](double a) {
    return std::hypot(p.x - (arc.center.x + arc.radius * std::cos(a)),
                      p.y - (arc.center.y + arc.radius * std::sin(a)));
  };
  return std::min(end_point(arc.start), end_point(arc.start + arc.sweep));
}

}  // namespace

void SynthConfig::check() const {
  auto fail = [](const char* what) { throw UsageError(std::string("synth config: ") + what); };
  if (image_size < 2 * kMargin + 8) fail("image_size too small");
  if (cracks_min > cracks_max) fail("cracks_min exceeds cracks_max");
  if (!(crack_length_min > 0.0 && crack_length_min <= crack_length_max)) fail("crack length range invalid");
  if (crack_length_max > image_size - 2 * kMargin) fail("crack_length_max too large for image_size");
  if (!(crack_contrast_min >= 0.0 && crack_contrast_min <= crack_contrast_max)) fail("crack contrast range invalid");
  if (distractors_min > distractors_max) fail("distractors_min exceeds distractors_max");
  if (!(distractor_contrast_min >= 0.0 && distractor_contrast_min <= distractor_contrast_max)) {
    fail("distractor contrast range invalid");
  }
  if (!(noise_sigma >= 0.0) || !(band_amplitude >= 0.0)) fail("noise and band amplitude must be non-negative");
}

double distance_to_polyline(PointAnnotation p, const Polyline& line) {
  require(!line.empty(), "distance_to_polyline: empty polyline");
  if (line.size() == 1) return std::hypot(p.x - line[0].x, p.y - line[0].y);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < line.size(); ++i) best = std::min(best, segment_distance(p, line[i - 1], line[i]));
  return best;
}

SynthImage generate_image(Rng& rng, const SynthConfig& config) {
  config.check();
  const std::size_t n = config.image_size;
  SynthImage out;
  out.image = Heatmap(n, n);

  // Background: low-frequency oriented bands.
  struct Band {
    double fx, fy, phase, amp;
  };
  std::vector<Band> bands;
  for (std::size_t b = 0; b < config.bands; ++b) {
    const double freq = rng.uniform(0.5, 2.5) / static_cast<double>(n);
    const double angle = rng.uniform(0.0, kPi);
    bands.push_back({freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2.0 * kPi),
                     config.band_amplitude * rng.uniform(0.5, 1.0)});
  }
  const double base = rng.uniform(0.45, 0.55);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double v = base;
      for (const auto& b : bands) v += b.amp * std::sin(2.0 * kPi * (b.fx * c + b.fy * r) + b.phase);
      out.image(r, c) = v;
    }
  }

  const auto n_distractors = static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(config.distractors_min), static_cast<std::int64_t>(config.distractors_max)));
  std::vector<Arc> arcs;
  for (std::size_t i = 0; i < n_distractors; ++i) arcs.push_back(make_distractor(rng, config));

  const auto n_cracks = static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(config.cracks_min), static_cast<std::int64_t>(config.cracks_max)));
  std::vector<double> contrasts;
  for (std::size_t i = 0; i < n_cracks; ++i) {
    out.cracks.push_back(make_crack(rng, config));
    contrasts.push_back(rng.uniform(config.crack_contrast_min, config.crack_contrast_max));
  }

  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const PointAnnotation p{static_cast<double>(c), static_cast<double>(r)};
      double dark = 0.0;
      for (const auto& a : arcs) {
        const double d = arc_distance(p, a);
        dark = std::max(dark, a.contrast * std::exp(-d * d / (2.0 * a.sigma * a.sigma)));
      }
      for (std::size_t i = 0; i < out.cracks.size(); ++i) {
        const double d = distance_to_polyline(p, out.cracks[i]);
        if (d > 4.0) continue;
        dark = std::max(dark, contrasts[i] * std::exp(-d * d / (2.0 * kCrackWidth * kCrackWidth)));
      }
      out.image(r, c) -= dark;
    }
  }

  for (auto& v : out.image.values) v = std::clamp(v + rng.normal(0.0, config.noise_sigma), 0.0, 1.0);

  const double last = static_cast<double>(n) - 1.0;
  for (const auto& crack : out.cracks) {
    const double len = polyline_length(crack);
    if (config.split_points && len > 24.0) {
      for (double frac : {0.25, 0.75}) {
        const auto q = point_at_arclength(crack, frac * len);
        out.points.push_back({std::clamp(q.x + rng.normal(0.0, kSplitJitterSigma), 0.0, last),
                              std::clamp(q.y + rng.normal(0.0, kSplitJitterSigma), 0.0, last)});
      }
    } else {
      out.points.push_back(point_at_arclength(crack, 0.5 * len));
    }
  }
  return out;
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = (7 * n + 5) / 10;
  s.val = (n + 5) / 10;
  if (s.train + s.val > n) s.val = n - s.train;
  s.test = n - s.train - s.val;
  return s;
}

Dataset generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir) {
  config.check();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw DataError("cannot create '" + (out_dir / "images").string() + "': " + ec.message());

  const std::size_t total = config.n_positive + config.n_negative;
  Dataset dataset;
  dataset.input_size = config.image_size;

  for (std::size_t i = 0; i < total; ++i) {
    SynthConfig per_image = config;
    if (i >= config.n_positive) {
      per_image.cracks_min = 0;
      per_image.cracks_max = 0;
    } else {
      per_image.cracks_min = std::max<std::size_t>(1, config.cracks_min);
      per_image.cracks_max = std::max(per_image.cracks_min, config.cracks_max);
    }
    Rng rng(mix_seed(config.seed, i));
    const SynthImage img = generate_image(rng, per_image);

    char name[48];
    std::snprintf(name, sizeof name, "images/img_%04zu.pgm", i);
    write_pgm(out_dir / name, img.image);
    dataset.records.push_back({name, config.image_size, config.image_size, img.points, Split::kTrain});
  }

  // Stratified split: each class is shuffled and dealt into train/val/test in
  // proportion to the global split sizes.
  const SplitSizes sizes = split_sizes(total);
  auto allocate = [&](std::size_t count) {
    const auto round_div = [&](std::size_t a) { return total == 0 ? 0 : (2 * a * count + total) / (2 * total); };
    SplitSizes s{round_div(sizes.train), round_div(sizes.val), 0};
    s.val = std::min(s.val, count - std::min(count, s.train));
    s.train = std::min(s.train, count);
    s.test = count - s.train - s.val;
    return s;
  };
  const SplitSizes pos = allocate(config.n_positive);
  const SplitSizes neg{sizes.train - std::min(sizes.train, pos.train), sizes.val - std::min(sizes.val, pos.val), 0};

  Rng split_rng(mix_seed(config.seed, 0x5B11));
  auto deal = [&](std::size_t first, std::size_t count, std::size_t n_train, std::size_t n_val) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), first);
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(split_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    n_train = std::min(n_train, count);
    n_val = std::min(n_val, count - n_train);
    for (std::size_t k = 0; k < count; ++k) {
      dataset.records[idx[k]].split = k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
    }
  };
  deal(0, config.n_positive, pos.train, pos.val);
  deal(config.n_positive, config.n_negative, neg.train, neg.val);

  write_text(out_dir / "manifest.json", serialize_manifest(dataset));
  return dataset;
}

}  // namespace wlk
