#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "wlk/wlk.h"

namespace fs = std::filesystem;

namespace {

struct ConfigHandle {
  wlk_config* ptr = nullptr;
  ConfigHandle() { EXPECT_EQ(wlk_config_create(&ptr), WLK_OK); }
  ~ConfigHandle() { wlk_config_free(ptr); }
  void set(const char* key, const std::string& value) { ASSERT_EQ(wlk_config_set(ptr, key, value.c_str()), WLK_OK); }
};

std::string to_json(const wlk_config* c) {
  size_t needed = 0;
  EXPECT_EQ(wlk_config_to_json(c, nullptr, 0, &needed), WLK_OK);
  std::string buf(needed, '\0');
  EXPECT_EQ(wlk_config_to_json(c, buf.data(), buf.size(), &needed), WLK_OK);
  buf.resize(needed - 1);
  return buf;
}

}  // namespace

TEST(CApi, VersionAndDefaults) {
  EXPECT_EQ(wlk_abi_version(), WLK_ABI_VERSION);
  const wlk_bound_params p = wlk_default_bound_params();
  EXPECT_EQ(p.r_lower, 6.25);
  EXPECT_EQ(p.r_upper, 25.0);
  EXPECT_EQ(p.tau, 0.25);
  EXPECT_EQ(p.disk_radius, 6.25);
}

TEST(CApi, BoundsMatchLogisticOfDistance) {
  const double xy[] = {10.0, 4.0};
  const wlk_bound_params p{3.0, 9.0, 0.5, 3.0};
  std::vector<double> lower(12 * 16), upper(12 * 16);
  ASSERT_EQ(wlk_make_bounds(xy, 1, 12, 16, 2.0, &p, lower.data(), upper.data()), WLK_OK);
  for (size_t r = 0; r < 12; ++r) {
    for (size_t c = 0; c < 16; ++c) {
      const double d = std::hypot((c + 0.5) * 2 - 0.5 - 10.0, (r + 0.5) * 2 - 0.5 - 4.0);
      EXPECT_NEAR(lower[r * 16 + c], 1 / (1 + std::exp(-(3.0 - d) / 0.5)), 1e-12);
      EXPECT_NEAR(upper[r * 16 + c], 1 / (1 + std::exp(-(9.0 - d) / 0.5)), 1e-12);
    }
  }
  ASSERT_EQ(wlk_make_bounds(nullptr, 0, 12, 16, 2.0, &p, lower.data(), upper.data()), WLK_OK);
  for (double v : upper) EXPECT_EQ(v, 0.0);
}

TEST(CApi, InvalidBoundsReportUsage) {
  const wlk_bound_params p{9.0, 3.0, 0.5, 3.0};
  double lower[4], upper[4];
  const double xy[] = {1, 1};
  EXPECT_EQ(wlk_make_bounds(xy, 1, 2, 2, 1.0, &p, lower, upper), WLK_ERROR_USAGE);
  EXPECT_NE(std::strlen(wlk_last_error()), 0u);
  EXPECT_EQ(wlk_make_bounds(xy, 1, 2, 2, 1.0, nullptr, lower, upper), WLK_ERROR_USAGE);
}

TEST(CApi, DiskMask) {
  const double xy[] = {3.0, 3.0};
  std::vector<double> mask(49);
  ASSERT_EQ(wlk_disk_mask(xy, 1, 7, 7, 1.0, 3.0, mask.data()), WLK_OK);
  double sum = 0;
  for (double v : mask) sum += v;
  EXPECT_EQ(sum, 29.0);
}

TEST(CApi, WindowLossValueAndGradient) {
  const double pred[] = {0.95, 0.5, 0.05};
  const double lower[] = {0.1, 0.1, 0.1};
  const double upper[] = {0.9, 0.9, 0.9};
  double loss = 0;
  double grad[3];
  ASSERT_EQ(wlk_window_loss(pred, lower, upper, 3, WLK_MSE, &loss, grad), WLK_OK);
  EXPECT_NEAR(loss, (0.0025 + 0.0025) / 3, 1e-15);
  EXPECT_NEAR(grad[0], 0.1 / 3, 1e-14);
  EXPECT_EQ(grad[1], 0.0);
  EXPECT_NEAR(grad[2], -0.1 / 3, 1e-14);

  ASSERT_EQ(wlk_window_loss(pred, lower, upper, 3, WLK_KLD, &loss, nullptr), WLK_OK);
  const double below = 0.1 * std::log(0.1 / 0.05) + 0.9 * std::log(0.9 / 0.95);
  const double above = 0.9 * std::log(0.9 / 0.95) + 0.1 * std::log(0.1 / 0.05);
  EXPECT_NEAR(loss, (below + above) / 3, 1e-14);

  const double bad_pred[] = {1.5};
  EXPECT_EQ(wlk_window_loss(bad_pred, lower, upper, 1, WLK_MSE, &loss, nullptr), WLK_ERROR_USAGE);
  EXPECT_EQ(wlk_window_loss(pred, lower, upper, 3, static_cast<wlk_divergence>(7), &loss, nullptr),
            WLK_ERROR_USAGE);
}

TEST(CApi, Auroc) {
  const double scores[] = {0.9, 0.4, 0.7, 0.1};
  const int labels[] = {1, 1, 0, 0};
  double out = 0;
  ASSERT_EQ(wlk_auroc(scores, labels, 4, &out), WLK_OK);
  EXPECT_DOUBLE_EQ(out, 0.75);
  const int one_class[] = {1, 1, 1, 1};
  EXPECT_EQ(wlk_auroc(scores, one_class, 4, &out), WLK_ERROR_USAGE);
}

TEST(CApi, ConfigKeysAndCommands) {
  ASSERT_GT(wlk_config_key_count(), 10u);
  bool found = false;
  for (size_t i = 0; i < wlk_config_key_count(); ++i) {
    if (std::string(wlk_config_key_name(i)) == "bounds.tau") {
      found = true;
      EXPECT_STREQ(wlk_config_key_default(i), "0.25");
      EXPECT_NE(std::strlen(wlk_config_key_doc(i)), 0u);
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(wlk_config_key_name(wlk_config_key_count()), nullptr);
  ASSERT_EQ(wlk_command_count(), 7u);
  EXPECT_STREQ(wlk_command_name(0), "synth");
  EXPECT_EQ(wlk_command_name(7), nullptr);
}

TEST(CApi, ConfigSetAndSerialize) {
  ConfigHandle c;
  c.set("bounds.tau", "1.25");
  EXPECT_NE(to_json(c.ptr).find("\"bounds.tau\": 1.25"), std::string::npos);
  EXPECT_EQ(wlk_config_set(c.ptr, "bounds.softness", "1"), WLK_ERROR_USAGE);
  EXPECT_NE(std::string(wlk_last_error()).find("bounds.softness"), std::string::npos);
  EXPECT_EQ(wlk_config_load_file(c.ptr, "/nonexistent.json"), WLK_ERROR_USAGE);

  char small[4];
  size_t needed = 0;
  EXPECT_EQ(wlk_config_to_json(c.ptr, small, sizeof small, &needed), WLK_ERROR_USAGE);
  EXPECT_GT(needed, sizeof small);
}

TEST(CApi, UnknownCommand) {
  ConfigHandle c;
  EXPECT_EQ(wlk_run("fit", c.ptr), WLK_ERROR_USAGE);
  EXPECT_EQ(wlk_run(nullptr, c.ptr), WLK_ERROR_USAGE);
}

TEST(CApi, PipelineThroughHandles) {
  const fs::path root = fs::temp_directory_path() / "wlk_capi_pipeline";
  fs::remove_all(root);
  ConfigHandle c;
  c.set("out", (root / "corpus").string());
  c.set("synth.image_size", "32");
  c.set("synth.crack_length_min", "6");
  c.set("synth.crack_length_max", "12");
  c.set("synth.n_positive", "8");
  c.set("synth.n_negative", "8");
  ASSERT_EQ(wlk_run("synth", c.ptr), WLK_OK) << wlk_last_error();
  const std::string manifest = (root / "corpus" / "manifest.json").string();

  wlk_dataset* ds = nullptr;
  ASSERT_EQ(wlk_dataset_load(manifest.c_str(), &ds), WLK_OK);
  EXPECT_EQ(wlk_dataset_size(ds), 16u);
  EXPECT_EQ(wlk_dataset_input_size(ds), 32u);
  const size_t n = wlk_dataset_point_count(ds, 0);
  ASSERT_GT(n, 0u);
  std::vector<double> xy(2 * n);
  EXPECT_EQ(wlk_dataset_points_input_space(ds, 0, xy.data()), WLK_OK);
  EXPECT_EQ(wlk_dataset_point_count(ds, 99), static_cast<size_t>(-1));
  EXPECT_EQ(wlk_dataset_points_input_space(ds, 99, xy.data()), WLK_ERROR_USAGE);
  wlk_dataset_free(ds);

  c.set("out", (root / "train").string());
  c.set("data.manifest", manifest);
  c.set("model.base_channels", "4");
  c.set("train.epochs", "1");
  ASSERT_EQ(wlk_run("train", c.ptr), WLK_OK) << wlk_last_error();

  wlk_model* model = nullptr;
  const std::string ckpt = (root / "train" / "model.wlkw").string();
  ASSERT_EQ(wlk_model_load(ckpt.c_str(), &model), WLK_OK);
  EXPECT_EQ(wlk_model_input_size(model), 32u);
  EXPECT_EQ(wlk_model_output_size(model), 16u);
  std::vector<double> image(32 * 32, 0.5), map(16 * 16);
  ASSERT_EQ(wlk_model_predict(model, image.data(), map.data()), WLK_OK);
  for (double v : map) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  wlk_model_free(model);

  c.set("out", (root / "infer").string());
  c.set("infer.checkpoint", ckpt);
  ASSERT_EQ(wlk_run("infer", c.ptr), WLK_OK) << wlk_last_error();
  const wlk_bound_params params = wlk_default_bound_params();
  wlk_summary summary{};
  ASSERT_EQ(wlk_evaluate(manifest.c_str(), (root / "infer" / "heatmaps").string().c_str(), "test", &params,
                         &summary),
            WLK_OK)
      << wlk_last_error();
  EXPECT_GE(summary.auroc, 0.0);
  EXPECT_LE(summary.auroc, 1.0);
  EXPECT_GE(summary.froc_score, 0.0);
  EXPECT_LE(summary.froc_score, 1.0);

  EXPECT_EQ(wlk_model_load((root / "missing.wlkw").string().c_str(), &model), WLK_ERROR_DATA);
  EXPECT_EQ(wlk_dataset_load((root / "missing.json").string().c_str(), &ds), WLK_ERROR_DATA);
  fs::remove_all(root);
}
