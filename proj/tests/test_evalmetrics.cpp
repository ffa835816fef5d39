#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "wlk/error.hpp"
#include "wlk/evalmetrics.hpp"
#include "wlk/rng.hpp"

using namespace wlk;

namespace {

// Sum of a few random Gaussian bumps plus mild noise: produces blobs of
// varied size and shape once thresholded.
Heatmap blob_map(Rng& rng, std::size_t n, int bumps) {
  Heatmap m(n, n);
  for (int b = 0; b < bumps; ++b) {
    const double cx = rng.uniform(0, n);
    const double cy = rng.uniform(0, n);
    const double sigma = rng.uniform(1.0, 6.0);
    const double amp = rng.uniform(0.3, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double d2 = (c - cx) * (c - cx) + (r - cy) * (r - cy);
        m(r, c) += amp * std::exp(-d2 / (2 * sigma * sigma));
      }
    }
  }
  for (auto& v : m.values) v = std::clamp(v + rng.uniform(-0.05, 0.05), 0.0, 1.0);
  return m;
}

std::vector<PointAnnotation> random_points(Rng& rng, int max_points, double extent) {
  const auto n = rng.uniform_int(0, max_points);
  std::vector<PointAnnotation> pts;
  for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(0, extent - 1), rng.uniform(0, extent - 1)});
  return pts;
}

}  // namespace

TEST(ImageScore, Examples) {
  EXPECT_EQ(image_score(Heatmap(4, 4, 0.3)), 0.3);
  Heatmap m(5, 5, 0.1);
  m(3, 1) = 0.99;
  EXPECT_EQ(image_score(m), 0.99);
  EXPECT_THROW(image_score(Heatmap()), ContractError);
}

TEST(ImageScore, PermutationInvariant) {
  Rng rng(1);
  Heatmap m(8, 8);
  for (auto& v : m.values) v = rng.uniform();
  const double s = image_score(m);
  for (int i = 0; i < 20; ++i) {
    for (std::size_t k = m.size() - 1; k > 0; --k) {
      std::swap(m.values[k], m.values[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k)))]);
    }
    EXPECT_EQ(image_score(m), s);
  }
}

TEST(Auroc, Examples) {
  const std::vector<int> labels{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, labels), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.4, 0.7, 0.1}, labels), 0.75);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels), 0.5);
}

TEST(Auroc, SingleClassRejected) {
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ContractError);
  EXPECT_THROW(auroc(std::vector<double>{0.1}, std::vector<int>{0, 1}), ContractError);
}

TEST(Auroc, MatchesPairwiseCountingAndTrapezoid) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 60));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = i == 0 ? 1 : i == 1 ? 0 : static_cast<int>(rng.bernoulli(0.4));
      scores[i] = coarse ? std::round(rng.uniform() * 5) / 5 : rng.uniform();
      if (labels[i] == 1) scores[i] = std::min(1.0, scores[i] + 0.1);
    }
    const double expected = oracle::pairwise_auroc(scores, labels);
    EXPECT_NEAR(auroc(scores, labels), expected, 1e-12);
    const RocCurve roc = roc_curve(scores, labels);
    EXPECT_NEAR(roc.auroc, expected, 1e-12);
  }
}

TEST(RocCurve, EndpointsAndMonotone) {
  Rng rng(3);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(i % 3 == 0);
    scores.push_back(std::round(rng.uniform() * 10) / 10);
  }
  const RocCurve roc = roc_curve(scores, labels);
  ASSERT_GE(roc.points.size(), 2u);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.front().tpr, 0.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    EXPECT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
    EXPECT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
    EXPECT_LT(roc.points[i].threshold, roc.points[i - 1].threshold);
  }
}

TEST(ConnectedComponents, Examples) {
  EXPECT_TRUE(connected_components(Heatmap(4, 4)).empty());

  Heatmap diag(3, 3);
  diag(0, 0) = 1;
  diag(1, 1) = 1;
  EXPECT_EQ(connected_components(diag).size(), 1u);

  Heatmap split(3, 3);
  split(0, 1) = 1;
  split(2, 1) = 1;
  const auto comps = connected_components(split);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0], std::vector<std::size_t>{1});
  EXPECT_EQ(comps[1], std::vector<std::size_t>{7});
}

TEST(ConnectedComponents, UShapeMergesAcrossPasses) {
  Heatmap u(4, 5);
  for (std::size_t r = 0; r < 4; ++r) {
    u(r, 0) = 1;
    u(r, 4) = 1;
  }
  for (std::size_t c = 0; c < 5; ++c) u(3, c) = 1;
  const auto comps = connected_components(u);
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_EQ(comps[0].size(), 11u);
}

TEST(ConnectedComponents, PartitionOfForeground) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Heatmap m(20, 20);
    for (auto& v : m.values) v = rng.bernoulli(0.45) ? 1.0 : 0.0;
    const auto comps = connected_components(m);
    std::vector<int> seen(m.size(), 0);
    std::size_t prev_first = 0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const std::size_t first = *std::min_element(comps[k].begin(), comps[k].end());
      if (k > 0) EXPECT_GT(first, prev_first);
      prev_first = first;
      for (std::size_t i : comps[k]) {
        EXPECT_EQ(m.values[i], 1.0);
        ++seen[i];
      }
    }
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(seen[i], m.values[i] != 0.0 ? 1 : 0);
  }
}

TEST(BoxesFromMap, Examples) {
  EXPECT_TRUE(boxes_from_map(Heatmap(8, 8, 0.2), 0.5).empty());

  Heatmap blob(10, 10, 0.1);
  for (std::size_t r = 4; r < 7; ++r) {
    for (std::size_t c = 2; c < 5; ++c) blob(r, c) = 0.6;
  }
  blob(5, 3) = 0.9;
  const auto boxes = boxes_from_map(blob, 0.5);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].x0, 2u);
  EXPECT_EQ(boxes[0].x1, 5u);
  EXPECT_EQ(boxes[0].y0, 4u);
  EXPECT_EQ(boxes[0].y1, 7u);
  EXPECT_EQ(boxes[0].area(), 9u);
  EXPECT_EQ(boxes[0].score, 0.9);
}

TEST(BoxesFromMap, BoxedAreaGrowsAsThresholdFalls) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Heatmap m = blob_map(rng, 32, 4);
    std::size_t prev = 0;
    for (double t = 1.0; t >= 0.0; t -= 0.05) {
      std::size_t area = 0;
      for (const auto& b : boxes_from_map(m, t)) area += b.area();
      // Boxes of merged components cover at least the union of their parts.
      std::vector<int> covered(m.size(), 0);
      for (const auto& b : boxes_from_map(m, t)) {
        for (std::size_t r = b.y0; r < b.y1; ++r) {
          for (std::size_t c = b.x0; c < b.x1; ++c) covered[r * m.cols + c] = 1;
        }
      }
      const auto union_area = static_cast<std::size_t>(std::accumulate(covered.begin(), covered.end(), 0));
      EXPECT_GE(union_area, prev);
      EXPECT_GE(area, union_area);
      prev = union_area;
    }
  }
}

TEST(SweepThresholds, DescendingDistinctAndContainsGrid) {
  Rng rng(6);
  std::vector<Heatmap> maps{blob_map(rng, 16, 2), blob_map(rng, 16, 3)};
  const auto t = sweep_thresholds(maps, 64);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LT(t[i], t[i - 1]);
  for (int k = 1; k <= 20; ++k) {
    EXPECT_NE(std::find_if(t.begin(), t.end(), [&](double v) { return std::abs(v - 0.05 * k) < 1e-12; }), t.end());
  }
  EXPECT_LE(t.size(), 64u + 20u);
}

TEST(CountDetections, SinglePointSingleBox) {
  Heatmap m(16, 16);
  for (std::size_t r = 5; r < 9; ++r) {
    for (std::size_t c = 5; c < 9; ++c) m(r, c) = 0.8;
  }
  const std::vector<PointAnnotation> pts{{6.5, 6.5}};
  const ImageCounts counts = count_detections(m, pts, 1.0, 2.0, 0.5);
  EXPECT_EQ(counts.fp_boxes, 0u);
  EXPECT_EQ(counts.recalled, 1u);
}

TEST(CountDetections, NineOfHundredCellsIsFalsePositive) {
  // Radius 1.5 at unit scale gives a 3x3 disk: 9 cells inside a 10x10 box.
  Heatmap m(20, 20);
  for (std::size_t r = 2; r < 12; ++r) {
    for (std::size_t c = 2; c < 12; ++c) m(r, c) = 1.0;
  }
  const std::vector<PointAnnotation> one{{3, 3}};
  const Heatmap mask = oracle::disk(one, 20, 20, 1.0, 1.5);
  ASSERT_EQ(std::accumulate(mask.values.begin(), mask.values.end(), 0.0), 9.0);
  const ImageCounts fp = count_detections(m, one, 1.0, 1.5, 0.5);
  EXPECT_EQ(fp.fp_boxes, 1u);
  EXPECT_EQ(fp.recalled, 1u);

  // One more mask cell inside the box reaches exactly 10%.
  const std::vector<PointAnnotation> two{{3, 3}, {11, 12}};
  EXPECT_EQ(count_detections(m, two, 1.0, 1.5, 0.5).fp_boxes, 0u);
}

TEST(CountDetections, DiskBoundingSquareIsNeverFalsePositive) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const double radius = rng.uniform(1.5, 10.0);
    const double scale = trial % 2 == 0 ? 1.0 : 2.0;
    const std::size_t n = 64;
    const PointAnnotation p{rng.uniform(radius, n * scale - radius - 1), rng.uniform(radius, n * scale - radius - 1)};
    const std::vector<PointAnnotation> pts{p};
    const Heatmap mask = oracle::disk(pts, n, n, scale, radius);
    std::size_t r0 = n, c0 = n, r1 = 0, c1 = 0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (mask(r, c) == 0.0) continue;
        r0 = std::min(r0, r);
        c0 = std::min(c0, c);
        r1 = std::max(r1, r);
        c1 = std::max(c1, c);
      }
    }
    Heatmap square(n, n);
    for (std::size_t r = r0; r <= r1; ++r) {
      for (std::size_t c = c0; c <= c1; ++c) square(r, c) = 1.0;
    }
    const ImageCounts counts = count_detections(square, pts, scale, radius, 0.5);
    EXPECT_EQ(counts.fp_boxes, 0u);
    EXPECT_EQ(counts.recalled, 1u);
  }
}

TEST(CountDetections, MatchesFloodFillOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const Heatmap m = blob_map(rng, 64, static_cast<int>(rng.uniform_int(1, 6)));
    const auto pts = random_points(rng, 3, 128);
    const double radius = rng.uniform(2.0, 12.0);
    for (double t : {0.15, 0.3, 0.5, 0.7, 0.9}) {
      const ImageCounts got = count_detections(m, pts, 2.0, radius, t);
      const oracle::Counts want = oracle::flood_fill_counts(m, pts, 2.0, radius, t);
      ASSERT_EQ(got.fp_boxes, want.fp_boxes) << "trial " << trial << " t=" << t;
      ASSERT_EQ(got.recalled, want.recalled) << "trial " << trial << " t=" << t;
    }
  }
}

TEST(Froc, RecallAtUsesStepEnvelope) {
  FrocCurve c;
  c.points = {{0.9, 0.0, 0.2, 0, 0}, {0.7, 0.05, 0.5, 0, 0}, {0.5, 0.15, 0.6, 0, 0}, {0.3, 0.6, 0.9, 0, 0}};
  EXPECT_EQ(c.recall_at(0.1), 0.5);
  EXPECT_EQ(c.recall_at(0.2), 0.6);
  EXPECT_EQ(c.recall_at(0.5), 0.6);
  EXPECT_EQ(c.recall_at(0.6), 0.9);
  EXPECT_EQ(c.recall_at(0.01), 0.2);
  c.points.erase(c.points.begin());
  EXPECT_EQ(c.recall_at(0.01), 0.0);
}

TEST(Froc, PerfectPredictionScoresOne) {
  Rng rng(9);
  const BoundParams params;
  std::vector<Heatmap> maps;
  std::vector<std::vector<PointAnnotation>> points;
  for (int i = 0; i < 12; ++i) {
    auto pts = i % 3 == 0 ? std::vector<PointAnnotation>{} : random_points(rng, 3, 128);
    if (i % 3 == 1 && pts.empty()) pts.push_back({64, 64});
    maps.push_back(oracle::disk(pts, 64, 64, 2.0, params.disk_radius));
    points.push_back(pts);
  }
  const auto thresholds = sweep_thresholds(maps);
  const FrocCurve curve = froc(maps, points, 128, params, thresholds);
  EXPECT_DOUBLE_EQ(curve.froc_score, 1.0);
  EXPECT_DOUBLE_EQ(curve.recall_at_01, 1.0);
  EXPECT_EQ(curve.total_images, 12u);
}

TEST(Froc, MonotoneAndAggregatesOracleCounts) {
  Rng rng(10);
  const BoundParams params;
  std::vector<Heatmap> maps;
  std::vector<std::vector<PointAnnotation>> points;
  for (int i = 0; i < 10; ++i) {
    maps.push_back(blob_map(rng, 64, 3));
    points.push_back(random_points(rng, 3, 128));
  }
  points[0].push_back({10, 10});
  const auto thresholds = sweep_thresholds(maps, 128);
  const FrocCurve curve = froc(maps, points, 128, params, thresholds);
  ASSERT_EQ(curve.points.size(), thresholds.size());
  std::size_t total_points = 0;
  for (const auto& p : points) total_points += p.size();
  EXPECT_EQ(curve.total_points, total_points);
  double max_fp = 0.0;
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const auto& fp = curve.points[k];
    if (k > 0) {
      EXPECT_GE(fp.fp_per_image, curve.points[k - 1].fp_per_image);
      EXPECT_GE(fp.recall, curve.points[k - 1].recall);
    }
    std::size_t fps = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const auto c = oracle::flood_fill_counts(maps[i], points[i], 2.0, params.disk_radius, fp.threshold);
      fps += c.fp_boxes;
      hits += c.recalled;
    }
    EXPECT_EQ(fp.fp_boxes, fps);
    EXPECT_EQ(fp.recalled, hits);
    max_fp = std::max(max_fp, static_cast<double>(fps) / maps.size());
    EXPECT_DOUBLE_EQ(fp.fp_per_image, max_fp);
    EXPECT_DOUBLE_EQ(fp.recall, static_cast<double>(hits) / total_points);
  }
  double sum = 0.0;
  for (double r : kFrocRates) sum += curve.recall_at(r);
  EXPECT_DOUBLE_EQ(curve.froc_score, sum / 5);
}

TEST(Froc, RecordOrderDoesNotMatter) {
  Rng rng(11);
  const BoundParams params;
  std::vector<Heatmap> maps;
  std::vector<std::vector<PointAnnotation>> points;
  for (int i = 0; i < 15; ++i) {
    maps.push_back(blob_map(rng, 64, 3));
    points.push_back(random_points(rng, 2, 128));
  }
  points[3].push_back({50, 70});
  const auto thresholds = sweep_thresholds(maps);
  const FrocCurve base = froc(maps, points, 128, params, thresholds);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> order(maps.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = order.size() - 1; k > 0; --k) {
      std::swap(order[k], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k)))]);
    }
    std::vector<Heatmap> m2;
    std::vector<std::vector<PointAnnotation>> p2;
    for (std::size_t i : order) {
      m2.push_back(maps[i]);
      p2.push_back(points[i]);
    }
    const FrocCurve other = froc(m2, p2, 128, params, sweep_thresholds(m2));
    EXPECT_EQ(other.froc_score, base.froc_score);
    EXPECT_EQ(other.recall_at_01, base.recall_at_01);
    ASSERT_EQ(other.points.size(), base.points.size());
    for (std::size_t k = 0; k < base.points.size(); ++k) {
      EXPECT_EQ(other.points[k].fp_per_image, base.points[k].fp_per_image);
      EXPECT_EQ(other.points[k].recall, base.points[k].recall);
    }
  }
}

TEST(Froc, NoPointsRejected) {
  std::vector<Heatmap> maps{Heatmap(8, 8)};
  std::vector<std::vector<PointAnnotation>> points{{}};
  const std::vector<double> thresholds{0.5};
  EXPECT_THROW(froc(maps, points, 16, BoundParams{}, thresholds), ContractError);
}
