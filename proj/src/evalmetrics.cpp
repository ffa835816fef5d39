#include "wlk/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "wlk/error.hpp"

namespace wlk {
namespace {

constexpr double kFpIntersectionRatio = 0.10;

class DisjointSet {
 public:
  std::size_t make() {
    parent_.push_back(parent_.size());
    return parent_.size() - 1;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // smaller label (earlier in raster order) wins
  }

 private:
  std::vector<std::size_t> parent_;
};

// Summed-area table over a binary mask, (rows+1) x (cols+1).
class IntegralImage {
 public:
  explicit IntegralImage(const Heatmap& mask)
      : cols_(mask.cols + 1), sums_((mask.rows + 1) * (mask.cols + 1), 0) {
    for (std::size_t r = 0; r < mask.rows; ++r) {
      for (std::size_t c = 0; c < mask.cols; ++c) {
        sums_[(r + 1) * cols_ + c + 1] = (mask(r, c) != 0.0 ? 1 : 0) + sums_[r * cols_ + c + 1] +
                                         sums_[(r + 1) * cols_ + c] - sums_[r * cols_ + c];
      }
    }
  }
  std::size_t count(const DetectionBox& b) const {
    return sums_[b.y1 * cols_ + b.x1] - sums_[b.y0 * cols_ + b.x1] - sums_[b.y1 * cols_ + b.x0] +
           sums_[b.y0 * cols_ + b.x0];
  }

 private:
  std::size_t cols_;
  std::vector<std::size_t> sums_;
};

std::vector<DetectionBox> boxes_from_components(const Heatmap& map,
                                                const std::vector<std::vector<std::size_t>>& comps) {
  std::vector<DetectionBox> boxes;
  boxes.reserve(comps.size());
  for (const auto& comp : comps) {
    DetectionBox b{map.cols, map.rows, 0, 0, -std::numeric_limits<double>::infinity()};
    for (std::size_t idx : comp) {
      const std::size_t r = idx / map.cols;
      const std::size_t c = idx % map.cols;
      b.x0 = std::min(b.x0, c);
      b.y0 = std::min(b.y0, r);
      b.x1 = std::max(b.x1, c + 1);
      b.y1 = std::max(b.y1, r + 1);
      b.score = std::max(b.score, map.values[idx]);
    }
    boxes.push_back(b);
  }
  return boxes;
}

struct PreparedImage {
  const Heatmap* map;
  std::vector<std::pair<std::size_t, std::size_t>> point_cells;  // (col, row)
  IntegralImage mask;
};

ImageCounts count_prepared(const PreparedImage& img, double threshold) {
  ImageCounts counts;
  const auto boxes = boxes_from_map(*img.map, threshold);
  for (const auto& b : boxes) {
    const double inside = static_cast<double>(img.mask.count(b));
    if (inside < kFpIntersectionRatio * static_cast<double>(b.area())) ++counts.fp_boxes;
  }
  for (const auto& [col, row] : img.point_cells) {
    const bool hit = std::any_of(boxes.begin(), boxes.end(),
                                 [&](const DetectionBox& b) { return b.contains(col, row); });
    if (hit) ++counts.recalled;
  }
  return counts;
}

PreparedImage prepare(const Heatmap& map, std::span<const PointAnnotation> points, double scale,
                      double disk_radius) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& p : points) {
    cells.emplace_back(cell_containing(p.x, scale, map.cols), cell_containing(p.y, scale, map.rows));
  }
  return {&map, std::move(cells), IntegralImage(disk_mask(points, map.rows, map.cols, scale, disk_radius))};
}

}  // namespace

double FrocCurve::recall_at(double rate) const noexcept {
  double best = 0.0;
  for (const auto& p : points) {
    if (p.fp_per_image <= rate) best = std::max(best, p.recall);
  }
  return best;
}

double image_score(const Heatmap& map) {
  require(!map.empty(), "image_score: empty map");
  return *std::max_element(map.values.begin(), map.values.end());
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "auroc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank sum of positives with tied groups sharing their average rank. Ranks
  // are doubled so every quantity stays an exact integer.
  double n_pos = 0.0;
  double rank_sum_x2 = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank_x2 = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        n_pos += 1.0;
        rank_sum_x2 += avg_rank_x2;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  require(n_pos > 0.0 && n_neg > 0.0, "auroc: need at least one positive and one negative");
  const double u_x2 = rank_sum_x2 - n_pos * (n_pos + 1.0);
  return u_x2 / (2.0 * n_pos * n_neg);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "roc_curve: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  require(n_pos > 0.0 && n_neg > 0.0, "roc_curve: need at least one positive and one negative");

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0.0;
  double fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] != 0 ? tp : fp) += 1.0;
      ++i;
    }
    curve.points.push_back({t, fp / n_neg, tp / n_pos});
  }
  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  curve.auroc = area;
  return curve;
}

std::vector<std::vector<std::size_t>> connected_components(const Heatmap& mask) {
  const std::size_t rows = mask.rows;
  const std::size_t cols = mask.cols;
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> labels(mask.size(), kNone);
  DisjointSet sets;

  // Pass 1: provisional labels from the already-visited 8-neighbourhood
  // (W, NW, N, NE), recording equivalences.
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask(r, c) == 0.0) continue;
      std::size_t label = kNone;
      auto visit = [&](std::size_t rr, std::size_t cc) {
        const std::size_t l = labels[rr * cols + cc];
        if (l == kNone) return;
        if (label == kNone) {
          label = l;
        } else {
          sets.unite(label, l);
        }
      };
      if (c > 0) visit(r, c - 1);
      if (r > 0) {
        if (c > 0) visit(r - 1, c - 1);
        visit(r - 1, c);
        if (c + 1 < cols) visit(r - 1, c + 1);
      }
      labels[r * cols + c] = label == kNone ? sets.make() : label;
    }
  }

  // Pass 2: resolve to roots; roots are numbered in order of first appearance.
  std::vector<std::vector<std::size_t>> components;
  std::vector<std::size_t> slot_of_root;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNone) continue;
    const std::size_t root = sets.find(labels[i]);
    if (root >= slot_of_root.size()) slot_of_root.resize(root + 1, kNone);
    if (slot_of_root[root] == kNone) {
      slot_of_root[root] = components.size();
      components.emplace_back();
    }
    components[slot_of_root[root]].push_back(i);
  }
  return components;
}

std::vector<DetectionBox> boxes_from_map(const Heatmap& map, double threshold) {
  Heatmap binary(map.rows, map.cols);
  for (std::size_t i = 0; i < map.size(); ++i) binary.values[i] = map.values[i] >= threshold ? 1.0 : 0.0;
  return boxes_from_components(map, connected_components(binary));
}

std::vector<double> sweep_thresholds(std::span<const Heatmap> maps, std::size_t max_distinct) {
  std::vector<double> distinct;
  for (const auto& m : maps) distinct.insert(distinct.end(), m.values.begin(), m.values.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> out;
  if (distinct.size() <= max_distinct || max_distinct < 2) {
    out = distinct;
  } else {
    const std::size_t n = distinct.size();
    for (std::size_t i = 0; i < max_distinct; ++i) {
      out.push_back(distinct[(i * (n - 1) + (max_distinct - 1) / 2) / (max_distinct - 1)]);
    }
  }
  for (int k = 1; k <= 20; ++k) out.push_back(0.05 * k);
  std::sort(out.begin(), out.end(), std::greater<>());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ImageCounts count_detections(const Heatmap& map, std::span<const PointAnnotation> points,
                             double scale, double disk_radius, double threshold) {
  return count_prepared(prepare(map, points, scale, disk_radius), threshold);
}

FrocCurve froc(std::span<const Heatmap> maps,
               std::span<const std::vector<PointAnnotation>> points, std::uint32_t input_size,
               const BoundParams& params, std::span<const double> thresholds) {
  params.check();
  require(maps.size() == points.size(), "froc: maps and annotations are not aligned");
  require(!maps.empty(), "froc: no images");
  require(std::is_sorted(thresholds.begin(), thresholds.end(), std::greater<>()),
          "froc: thresholds must be sorted in descending order");

  FrocCurve curve;
  curve.total_images = maps.size();
  std::vector<PreparedImage> prepared;
  prepared.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    require(!maps[i].empty(), "froc: empty map");
    const double scale = static_cast<double>(input_size) / static_cast<double>(maps[i].cols);
    prepared.push_back(prepare(maps[i], points[i], scale, params.disk_radius));
    curve.total_points += points[i].size();
  }
  require(curve.total_points > 0, "froc: the evaluated images contain no annotation points");

  double fp_envelope = 0.0;
  for (double t : thresholds) {
    FrocPoint pt;
    pt.threshold = t;
    for (const auto& img : prepared) {
      const auto c = count_prepared(img, t);
      pt.fp_boxes += c.fp_boxes;
      pt.recalled += c.recalled;
    }
    fp_envelope = std::max(fp_envelope, static_cast<double>(pt.fp_boxes) / curve.total_images);
    pt.fp_per_image = fp_envelope;
    pt.recall = static_cast<double>(pt.recalled) / static_cast<double>(curve.total_points);
    curve.points.push_back(pt);
  }

  double sum = 0.0;
  for (double r : kFrocRates) sum += curve.recall_at(r);
  curve.froc_score = sum / std::size(kFrocRates);
  curve.recall_at_01 = curve.recall_at(0.1);
  return curve;
}

FrocCurve froc(std::span<const Heatmap> maps, std::span<const ImageRecord* const> records,
               std::uint32_t input_size, const BoundParams& params,
               std::span<const double> thresholds) {
  std::vector<std::vector<PointAnnotation>> points;
  points.reserve(records.size());
  for (const auto* r : records) points.push_back(points_in_input_space(*r, input_size));
  return froc(maps, points, input_size, params, thresholds);
}

}  // namespace wlk
