#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include <json.hpp>

#include "wlk/config.hpp"
#include "wlk/error.hpp"
#include "wlk/pipeline.hpp"

using namespace wlk;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wlk_cfg_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig tiny_corpus_config(const fs::path& out) {
  RunConfig c;
  c.set("out", out.string());
  c.set("synth.image_size", "32");
  c.set("synth.crack_length_min", "6");
  c.set("synth.crack_length_max", "12");
  c.set("synth.n_positive", "10");
  c.set("synth.n_negative", "10");
  return c;
}

json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  return json::parse(bytes.begin(), bytes.end());
}

}  // namespace

TEST(RunConfig, DefaultsMatchKeyTable) {
  const RunConfig c;
  EXPECT_EQ(c.get_real("bounds.r_lower"), 6.25);
  EXPECT_EQ(c.get_real("bounds.r_upper"), 25.0);
  EXPECT_EQ(c.get_real("bounds.tau"), 0.25);
  EXPECT_EQ(c.get_real("bounds.disk_radius"), 6.25);
  EXPECT_EQ(c.get_int("train.epochs"), 40);
  EXPECT_EQ(c.get_string("train.divergence"), "mse");
  EXPECT_TRUE(c.get_bool("train.hflip"));
  EXPECT_EQ(c.model().strides, (std::vector<std::uint32_t>{2, 4, 8, 16}));
  EXPECT_EQ(c.bounds(), BoundParams{});
  for (const auto& k : config_keys()) {
    EXPECT_FALSE(k.doc.empty()) << k.name;
  }
}

TEST(RunConfig, SetParsesByType) {
  RunConfig c;
  c.set("train.lr", "2.5e-4");
  c.set("train.epochs", "3");
  c.set("train.rotate", "off");
  c.set("model.strides", "2,4,8");
  c.set("train.divergence", "kld");
  EXPECT_EQ(c.get_real("train.lr"), 2.5e-4);
  EXPECT_EQ(c.train().epochs, 3u);
  EXPECT_FALSE(c.train().augment.rotate);
  EXPECT_EQ(c.model().levels(), 3u);
  EXPECT_EQ(c.train().divergence, Divergence::kKld);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(c.set("train.momentum", "0.9"), UsageError);
  EXPECT_THROW(c.set("train.epochs", "three"), UsageError);
  EXPECT_THROW(c.set("train.epochs", "3.5"), UsageError);
  EXPECT_THROW(c.set("train.lr", "fast"), UsageError);
  EXPECT_THROW(c.set("train.hflip", "maybe"), UsageError);
  EXPECT_THROW(c.set("model.strides", "2,,4"), UsageError);
  EXPECT_THROW(c.get_real("nope"), UsageError);
}

TEST(RunConfig, MergeJsonLayersOverDefaults) {
  RunConfig c;
  c.merge_json(R"({"bounds.tau": 1.25, "train.epochs": "7", "train.hflip": false, "model.strides": [2, 4]})");
  EXPECT_EQ(c.bounds().tau, 1.25);
  EXPECT_EQ(c.get_int("train.epochs"), 7);
  EXPECT_FALSE(c.get_bool("train.hflip"));
  EXPECT_EQ(c.model().levels(), 2u);
  EXPECT_EQ(c.bounds().r_lower, 6.25);

  EXPECT_THROW(c.merge_json(R"({"bounds.tau": "soft"})"), UsageError);
  EXPECT_THROW(c.merge_json(R"({"train.epochs": 1.5})"), UsageError);
  EXPECT_THROW(c.merge_json(R"({"unknown": 1})"), UsageError);
  EXPECT_THROW(c.merge_json(R"([1, 2])"), UsageError);
  EXPECT_THROW(c.merge_json(R"({"bounds.tau": )"), UsageError);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig a;
  a.set("bounds.r_lower", "12.5");
  a.set("synth.split_points", "true");
  RunConfig b;
  b.merge_json(a.to_json());
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(RunConfig, MergeFileErrors) {
  RunConfig c;
  EXPECT_THROW(c.merge_file("/nonexistent/config.json"), Error);
}

TEST(RunConfig, NegativeCountsRejected) {
  RunConfig c;
  c.set("train.batch_size", "-2");
  EXPECT_THROW(c.train(), UsageError);
}

TEST(ParseGrid, FieldsAndDefaults) {
  RunConfig base;
  base.set("bounds.r_upper", "20");
  const auto cells = parse_grid(R"([{"r_lower": 12.5}, {"tau": 1.25, "divergence": "kld", "seed": 3}])", base);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].bounds.r_lower, 12.5);
  EXPECT_EQ(cells[0].bounds.r_upper, 20.0);
  EXPECT_EQ(cells[0].divergence, Divergence::kMse);
  EXPECT_EQ(cells[1].bounds.tau, 1.25);
  EXPECT_EQ(cells[1].divergence, Divergence::kKld);
  EXPECT_EQ(cells[1].seed, 3u);
}

TEST(ParseGrid, Rejections) {
  const RunConfig base;
  EXPECT_THROW(parse_grid(R"({"tau": 1})", base), UsageError);
  EXPECT_THROW(parse_grid(R"([{"width": 1}])", base), UsageError);
  EXPECT_THROW(parse_grid(R"([{"divergence": "l2"}])", base), UsageError);
  EXPECT_THROW(parse_grid("[", base), UsageError);
}

TEST(AblationCsv, Layout) {
  AblationRow ok;
  ok.cell.bounds.r_lower = 12.5;
  ok.ok = true;
  ok.auroc = 0.9;
  ok.recall_at_01 = 0.5;
  ok.froc_score = 0.75;
  AblationRow bad;
  bad.cell.divergence = Divergence::kKld;
  bad.error = "boom";
  const std::vector<AblationRow> rows{ok, bad};
  EXPECT_EQ(ablation_csv(rows),
            "tau,r_lower,r_upper,divergence,auroc,recall_at_01,froc_score\n"
            "0.25,12.5,25,mse,0.9,0.5,0.75\n"
            "0.25,6.25,25,kld,error,error,error\n");
}

TEST(SelectRecords, Splits) {
  Dataset ds;
  ds.records.resize(3);
  ds.records[1].split = Split::kVal;
  ds.records[2].split = Split::kTest;
  EXPECT_EQ(select_records(ds, "all").size(), 3u);
  EXPECT_EQ(select_records(ds, "val").size(), 1u);
  EXPECT_THROW(select_records(ds, "holdout"), UsageError);
}

TEST(EvaluateMaps, SingleClassSplitIsDataError) {
  ImageRecord r;
  r.width = r.height = 8;
  r.points = {{2, 2}};
  const std::vector<const ImageRecord*> records{&r};
  const std::vector<Heatmap> maps{Heatmap(4, 4)};
  EXPECT_THROW(evaluate_maps(maps, records, 8, BoundParams{}), DataError);
}

TEST(Reports, CsvAndSummaryFormats) {
  EvalReport report;
  report.roc.points = {{1.5, 0, 0}, {0.5, 0.25, 1}, {0, 1, 1}};
  report.roc.auroc = 0.875;
  report.froc.points = {{0.5, 0.1, 0.5, 1, 1}};
  report.froc.froc_score = 0.5;
  report.froc.recall_at_01 = 0.5;
  EXPECT_EQ(roc_csv(report.roc), "threshold,fpr,tpr\n1.5,0,0\n0.5,0.25,1\n0,1,1\n");
  EXPECT_EQ(froc_csv(report.froc), "threshold,fp_per_image,recall\n0.5,0.1,0.5\n");
  const json s = json::parse(summary_json(report));
  EXPECT_EQ(s.at("auroc").get<double>(), 0.875);
  EXPECT_EQ(s.at("froc_score").get<double>(), 0.5);
  EXPECT_EQ(s.at("recall_at_01").get<double>(), 0.5);
  EXPECT_NE(roc_svg(report.roc).find("<svg"), std::string::npos);
  EXPECT_NE(froc_svg(report.froc).find("<polyline"), std::string::npos);
}

TEST(Commands, NamesAndUnknown) {
  std::vector<std::string> names(command_names().begin(), command_names().end());
  EXPECT_EQ(names, (std::vector<std::string>{"synth", "bounds", "train", "infer", "eval", "curves", "ablate"}));
  EXPECT_THROW(run_command("fit", RunConfig{}), UsageError);
}

TEST(Commands, MissingOutIsUsageError) {
  EXPECT_THROW(cmd_synth(RunConfig{}), UsageError);
}

TEST(Commands, SynthBoundsEvalCurves) {
  const fs::path root = scratch("pipeline");
  RunConfig synth = tiny_corpus_config(root / "corpus");
  cmd_synth(synth);
  const fs::path manifest = root / "corpus" / "manifest.json";
  ASSERT_TRUE(fs::exists(manifest));
  EXPECT_TRUE(fs::exists(root / "corpus" / "config.resolved.json"));
  const Dataset ds = load_manifest(manifest);
  EXPECT_EQ(ds.records.size(), 20u);

  RunConfig bounds;
  bounds.set("out", (root / "bounds").string());
  bounds.set("data.manifest", manifest.string());
  bounds.set("data.split", "all");
  cmd_bounds(bounds);
  const std::string stem = record_stem(ds.records[0]);
  const Heatmap l1 = read_wlk(root / "bounds" / (stem + ".lower.l1.wlk"));
  EXPECT_EQ(l1.rows, 16u);
  EXPECT_TRUE(fs::exists(root / "bounds" / (stem + ".upper.l4.wlk")));

  // Disk-mask heatmaps are a perfect localizer.
  const fs::path maps = root / "maps";
  fs::create_directories(maps);
  for (const auto* r : ds.split(Split::kTest)) {
    const auto pts = points_in_input_space(*r, 32);
    write_wlk(maps / (record_stem(*r) + ".wlk"), disk_mask(pts, 16, 16, 2.0, 6.25));
  }
  RunConfig eval;
  eval.set("out", (root / "eval").string());
  eval.set("data.manifest", manifest.string());
  eval.set("eval.heatmaps", maps.string());
  cmd_eval(eval);
  const json summary = read_json(root / "eval" / "summary.json");
  EXPECT_EQ(summary.at("froc_score").get<double>(), 1.0);
  EXPECT_EQ(summary.at("auroc").get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(root / "eval" / "roc.csv"));
  EXPECT_TRUE(fs::exists(root / "eval" / "froc.svg"));

  RunConfig curves;
  curves.set("out", (root / "curves").string());
  curves.set("curves.input", (root / "eval").string());
  cmd_curves(curves);
  EXPECT_TRUE(fs::exists(root / "curves" / "roc.svg"));

  RunConfig missing = eval;
  missing.set("out", (root / "eval2").string());
  missing.set("eval.heatmaps", (root / "nowhere").string());
  EXPECT_THROW(cmd_eval(missing), Error);

  RunConfig wrong_size = bounds;
  wrong_size.set("model.input_size", "64");
  EXPECT_THROW(cmd_bounds(wrong_size), UsageError);
  fs::remove_all(root);
}

TEST(Commands, TrainInferAndAblationCell) {
  const fs::path root = scratch("train");
  cmd_synth(tiny_corpus_config(root / "corpus"));
  const fs::path manifest = root / "corpus" / "manifest.json";

  RunConfig train;
  train.set("out", (root / "train").string());
  train.set("data.manifest", manifest.string());
  train.set("model.base_channels", "4");
  train.set("train.epochs", "2");
  cmd_train(train);
  EXPECT_TRUE(fs::exists(root / "train" / "model.wlkw"));
  const auto log = read_file(root / "train" / "train_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);

  RunConfig infer;
  infer.set("out", (root / "infer").string());
  infer.set("data.manifest", manifest.string());
  infer.set("infer.checkpoint", (root / "train" / "model.wlkw").string());
  cmd_infer(infer);
  const Dataset ds = load_manifest(manifest);
  for (const auto* r : ds.split(Split::kTest)) {
    const Heatmap m = read_wlk(root / "infer" / "heatmaps" / (record_stem(*r) + ".wlk"));
    EXPECT_EQ(m.rows, 16u);
  }

  AblationCell cell;
  cell.bounds.r_lower = 8;
  cell.seed = 2;
  const AblationRow row = run_ablation_cell(train, cell, root / "cell");
  EXPECT_TRUE(row.ok) << row.error;
  EXPECT_GE(row.auroc, 0.0);
  EXPECT_LE(row.froc_score, 1.0);
  const json resolved = read_json(root / "cell" / "config.resolved.json");
  EXPECT_EQ(resolved.at("bounds.r_lower").get<double>(), 8.0);
  EXPECT_EQ(resolved.at("train.seed").get<int>(), 2);

  AblationCell broken;
  broken.bounds.r_lower = 30;  // above r_upper
  const AblationRow failed = run_ablation_cell(train, broken, root / "broken");
  EXPECT_FALSE(failed.ok);
  EXPECT_FALSE(failed.error.empty());
  fs::remove_all(root);
}
