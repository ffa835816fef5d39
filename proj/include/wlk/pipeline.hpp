#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wlk/config.hpp"
#include "wlk/evalmetrics.hpp"

namespace wlk {

struct EvalReport {
  RocCurve roc;
  FrocCurve froc;
};

/// Records of `split` ("train", "val", "test" or "all").
std::vector<const ImageRecord*> select_records(const Dataset& dataset, std::string_view split);

/// Image-level ROC (max response) and FROC for maps aligned with `records`.
EvalReport evaluate_maps(std::span<const Heatmap> maps, std::span<const ImageRecord* const> records,
                         std::uint32_t input_size, const BoundParams& params,
                         std::size_t max_thresholds = 512);

std::string roc_csv(const RocCurve& roc);
std::string froc_csv(const FrocCurve& froc);
std::string summary_json(const EvalReport& report);
std::string roc_svg(const RocCurve& roc);
std::string froc_svg(const FrocCurve& froc);

struct AblationCell {
  BoundParams bounds;
  Divergence divergence = Divergence::kMse;
  std::uint64_t seed = 0;  // training and model-init seed
};

struct AblationRow {
  AblationCell cell;
  bool ok = false;
  double auroc = 0.0;
  double recall_at_01 = 0.0;
  double froc_score = 0.0;
  std::string error;
};

/// Parses a JSON array of cells; omitted fields (tau, r_lower, r_upper,
/// disk_radius, divergence, seed) fall back to `base`.
std::vector<AblationCell> parse_grid(std::string_view text, const RunConfig& base);

/// Trains on the train/val splits, then infers and evaluates the test split.
AblationRow run_ablation_cell(const RunConfig& base, const AblationCell& cell,
                              const std::filesystem::path& cell_dir);

/// Header `tau,r_lower,r_upper,divergence,auroc,recall_at_01,froc_score`;
/// failed cells carry `error` in the metric columns.
std::string ablation_csv(std::span<const AblationRow> rows);

std::vector<AblationRow> run_ablation(const RunConfig& base, std::span<const AblationCell> grid,
                                      const std::filesystem::path& out_dir, std::size_t jobs);

void cmd_synth(const RunConfig& config);
void cmd_bounds(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_infer(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_curves(const RunConfig& config);
void cmd_ablate(const RunConfig& config);

std::span<const std::string_view> command_names();

/// Dispatches to cmd_*; throws UsageError for unknown commands.
void run_command(std::string_view command, const RunConfig& config);

}  // namespace wlk
