#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "wlk/annotations.hpp"
#include "wlk/error.hpp"
#include "wlk/synthgen.hpp"

using namespace wlk;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wlk_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

double mean(const Heatmap& m) {
  double s = 0.0;
  for (double v : m.values) s += v;
  return s / static_cast<double>(m.size());
}

}  // namespace

TEST(GenerateImage, ForcedCrackCounts) {
  SynthConfig cfg;
  cfg.cracks_min = cfg.cracks_max = 0;
  Rng rng(1);
  EXPECT_TRUE(generate_image(rng, cfg).points.empty());
  cfg.cracks_min = cfg.cracks_max = 2;
  for (int i = 0; i < 10; ++i) {
    const SynthImage img = generate_image(rng, cfg);
    EXPECT_EQ(img.points.size(), 2u);
    EXPECT_EQ(img.cracks.size(), 2u);
  }
}

TEST(GenerateImage, SeedDeterminesImage) {
  SynthConfig cfg;
  Rng a(42), b(42), c(43);
  const SynthImage x = generate_image(a, cfg);
  const SynthImage y = generate_image(b, cfg);
  const SynthImage z = generate_image(c, cfg);
  EXPECT_EQ(x.image, y.image);
  EXPECT_EQ(x.points, y.points);
  EXPECT_NE(x.image, z.image);
}

TEST(GenerateImage, ValuesInUnitRange) {
  SynthConfig cfg;
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const SynthImage img = generate_image(rng, cfg);
    EXPECT_EQ(img.image.rows, 128u);
    for (double v : img.image.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(GenerateImage, PointsLieOnTheirCrack) {
  SynthConfig cfg;
  cfg.cracks_min = 1;
  cfg.cracks_max = 3;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const SynthImage img = generate_image(rng, cfg);
    ASSERT_EQ(img.points.size(), img.cracks.size());
    for (std::size_t k = 0; k < img.points.size(); ++k) {
      EXPECT_LT(distance_to_polyline(img.points[k], img.cracks[k]), 1.0);
      EXPECT_GE(img.points[k].x, 0.0);
      EXPECT_LT(img.points[k].x, 128.0);
    }
  }
}

TEST(GenerateImage, SplitPointsStayNearLongCracks) {
  SynthConfig cfg;
  cfg.split_points = true;
  cfg.crack_length_min = 30;
  cfg.crack_length_max = 36;
  cfg.cracks_min = cfg.cracks_max = 1;
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const SynthImage img = generate_image(rng, cfg);
    ASSERT_EQ(img.points.size(), 2u);
    for (const auto& p : img.points) EXPECT_LT(distance_to_polyline(p, img.cracks[0]), 15.0);
  }
}

TEST(GenerateImage, CrackDarkensItsPixels) {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.cracks_min = cfg.cracks_max = 1;
  cfg.crack_contrast_min = cfg.crack_contrast_max = 0.3;
  cfg.distractors_min = cfg.distractors_max = 0;
  Rng a(5);
  const SynthImage img = generate_image(a, cfg);
  Rng b(5);
  cfg.crack_contrast_min = cfg.crack_contrast_max = 0.0;
  const SynthImage plain = generate_image(b, cfg);
  const auto p = img.points[0];
  const auto r = static_cast<std::size_t>(std::round(p.y));
  const auto c = static_cast<std::size_t>(std::round(p.x));
  EXPECT_GT(plain.image(r, c) - img.image(r, c), 0.1);
}

TEST(DistanceToPolyline, Segments) {
  const Polyline line{{0, 0}, {10, 0}, {10, 10}};
  EXPECT_DOUBLE_EQ(distance_to_polyline({5, 3}, line), 3.0);
  EXPECT_DOUBLE_EQ(distance_to_polyline({13, 5}, line), 3.0);
  EXPECT_DOUBLE_EQ(distance_to_polyline({-3, -4}, line), 5.0);
  EXPECT_DOUBLE_EQ(distance_to_polyline({10, 0}, line), 0.0);
}

TEST(SynthConfig, Validation) {
  SynthConfig cfg;
  EXPECT_NO_THROW(cfg.check());
  cfg.cracks_min = 4;
  cfg.cracks_max = 3;
  EXPECT_THROW(cfg.check(), UsageError);
  cfg = SynthConfig{};
  cfg.image_size = 16;
  EXPECT_THROW(cfg.check(), UsageError);
  cfg = SynthConfig{};
  cfg.crack_length_max = 500;
  EXPECT_THROW(cfg.check(), UsageError);
  cfg = SynthConfig{};
  cfg.noise_sigma = -1;
  EXPECT_THROW(cfg.check(), UsageError);
}

TEST(SplitSizes, Arithmetic) {
  const SplitSizes s = split_sizes(100);
  EXPECT_EQ(s.train, 70u);
  EXPECT_EQ(s.val, 10u);
  EXPECT_EQ(s.test, 20u);
  for (std::size_t n = 0; n < 300; ++n) {
    const SplitSizes t = split_sizes(n);
    EXPECT_EQ(t.train + t.val + t.test, n);
  }
}

TEST(GenerateCorpus, SeventyThirty) {
  SynthConfig cfg;
  cfg.image_size = 48;
  cfg.crack_length_min = 8;
  cfg.crack_length_max = 20;
  cfg.n_positive = 70;
  cfg.n_negative = 30;
  const fs::path dir = scratch("70_30");
  const Dataset ds = generate_corpus(cfg, dir);
  ASSERT_EQ(ds.records.size(), 100u);
  EXPECT_EQ(ds.split(Split::kTrain).size(), 70u);
  EXPECT_EQ(ds.split(Split::kVal).size(), 10u);
  EXPECT_EQ(ds.split(Split::kTest).size(), 20u);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    std::size_t pos = 0;
    for (const auto* r : ds.split(s)) pos += r->positive();
    EXPECT_GT(pos, 0u) << to_string(s);
    EXPECT_LT(pos, ds.split(s).size()) << to_string(s);
  }
  std::size_t positives = 0;
  for (const auto& r : ds.records) positives += r.positive();
  EXPECT_EQ(positives, 70u);
  EXPECT_TRUE(validate(ds).empty());

  const Dataset loaded = load_manifest(dir / "manifest.json");
  EXPECT_EQ(loaded, ds);
  const Heatmap img = load_image(dir / ds.records[0].image_path);
  EXPECT_EQ(img.rows, 48u);
  fs::remove_all(dir);
}

TEST(GenerateCorpus, ByteIdenticalRegeneration) {
  SynthConfig cfg;
  cfg.image_size = 48;
  cfg.crack_length_min = 8;
  cfg.crack_length_max = 20;
  cfg.n_positive = 6;
  cfg.n_negative = 4;
  cfg.seed = 9;
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const Dataset da = generate_corpus(cfg, a);
  generate_corpus(cfg, b);
  EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
  for (const auto& r : da.records) EXPECT_EQ(read_file(a / r.image_path), read_file(b / r.image_path));

  cfg.seed = 10;
  const fs::path c = scratch("det_c");
  generate_corpus(cfg, c);
  EXPECT_NE(read_file(a / "manifest.json"), read_file(c / "manifest.json"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(GenerateCorpus, AllNegative) {
  SynthConfig cfg;
  cfg.image_size = 48;
  cfg.crack_length_min = 8;
  cfg.crack_length_max = 20;
  cfg.n_positive = 0;
  cfg.n_negative = 10;
  const fs::path dir = scratch("neg");
  const Dataset ds = generate_corpus(cfg, dir);
  EXPECT_EQ(ds.records.size(), 10u);
  for (const auto& r : ds.records) EXPECT_FALSE(r.positive());
  EXPECT_TRUE(validate(ds).empty());
  fs::remove_all(dir);
}

TEST(GenerateCorpus, BackgroundStatisticsMatchAcrossClasses) {
  SynthConfig cfg;
  cfg.cracks_min = cfg.cracks_max = 0;
  double neg = 0.0;
  Rng rn(11);
  for (int i = 0; i < 100; ++i) neg += mean(generate_image(rn, cfg).image);
  cfg.cracks_min = 1;
  cfg.cracks_max = 3;
  double pos = 0.0;
  Rng rp(12);
  for (int i = 0; i < 100; ++i) pos += mean(generate_image(rp, cfg).image);
  EXPECT_LT(std::abs(pos - neg) / 100, 0.05);
}
