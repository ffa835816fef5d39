#include "wlk/pipeline.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wlk/error.hpp"

namespace wlk {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kCommands[] = {"synth", "bounds", "train", "infer", "eval", "curves", "ablate"};

fs::path required_path(const RunConfig& config, std::string_view key) {
  const std::string value = config.get_string(key);
  if (value.empty()) throw UsageError("missing required setting '" + std::string(key) + "'");
  return value;
}

fs::path existing_path(const RunConfig& config, std::string_view key) {
  fs::path p = required_path(config, key);
  if (!fs::exists(p)) throw DataError(std::string(key) + ": '" + p.string() + "' does not exist");
  return p;
}

// Creates the run directory and records the resolved configuration.
fs::path prepare_out(const RunConfig& config) {
  fs::path out = required_path(config, "out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory '" + out.string() + "': " + ec.message());
  write_text(out / "config.resolved.json", config.to_json());
  return out;
}

BoundParams checked_bounds(const RunConfig& config) {
  BoundParams p = config.bounds();
  try {
    p.check();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return p;
}

ModelConfig resolve_model(const RunConfig& config, const Dataset& dataset) {
  ModelConfig model = config.model();
  if (model.input_size == 0) model.input_size = dataset.input_size;
  if (model.input_size != dataset.input_size) {
    throw UsageError("model.input_size " + std::to_string(model.input_size) +
                     " differs from the manifest input_size " + std::to_string(dataset.input_size));
  }
  try {
    model.check();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const auto report = validate(dataset, model.strides.back());
  if (!report.empty()) throw DataError("manifest: " + report.front().message);
  return model;
}

struct LoadedManifest {
  Dataset dataset;
  fs::path root;
};

LoadedManifest load_data(const RunConfig& config) {
  const fs::path manifest = existing_path(config, "data.manifest");
  return {load_manifest(manifest), manifest.parent_path()};
}

std::string fmt(double v) { return format_number(v); }

// Minimal line plot; x and y in [0, x_max] x [0, 1].
std::string svg_plot(const std::vector<std::pair<double, double>>& pts, double x_max,
                     const std::string& x_label, const std::string& y_label, const std::string& title) {
  constexpr double kW = 480, kH = 360, kL = 60, kR = 20, kT = 40, kB = 50;
  const double pw = kW - kL - kR;
  const double ph = kH - kT - kB;
  auto sx = [&](double x) { return kL + pw * std::clamp(x / x_max, 0.0, 1.0); };
  auto sy = [&](double y) { return kT + ph * (1.0 - std::clamp(y, 0.0, 1.0)); };
  char buf[128];
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x_max * i / 5.0;
    const double fy = i / 5.0;
    std::snprintf(buf, sizeof buf, "%.2f", fx);
    s << "<text x=\"" << sx(fx) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.1f", fy);
    s << "<text x=\"" << kL - 8 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
  }
  s << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  s << "<text x=\"16\" y=\"" << kT + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << kT + ph / 2 << ")\">" << y_label << "</text>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(x), sy(y));
    s << buf;
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  const auto bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_cell(const std::string& s, const fs::path& file) {
  try {
    return std::stod(s);
  } catch (const std::logic_error&) {
    throw DataError(file.string() + ": bad number '" + s + "'");
  }
}

EvalReport evaluate_model(const TinyNet& net, std::span<const Sample> samples,
                          std::span<const ImageRecord* const> records, std::uint32_t input_size,
                          const BoundParams& params) {
  std::vector<Heatmap> maps;
  maps.reserve(samples.size());
  for (const auto& s : samples) maps.push_back(predict(net, s.image));
  return evaluate_maps(maps, records, input_size, params);
}

RunConfig cell_config(const RunConfig& base, const AblationCell& cell) {
  RunConfig c = base;
  c.set("bounds.r_lower", fmt(cell.bounds.r_lower));
  c.set("bounds.r_upper", fmt(cell.bounds.r_upper));
  c.set("bounds.tau", fmt(cell.bounds.tau));
  c.set("bounds.disk_radius", fmt(cell.bounds.disk_radius));
  c.set("train.divergence", std::string(to_string(cell.divergence)));
  c.set("train.seed", std::to_string(cell.seed));
  c.set("model.seed", std::to_string(cell.seed));
  return c;
}

json row_to_json(const AblationRow& row) {
  return {{"ok", row.ok}, {"auroc", row.auroc}, {"recall_at_01", row.recall_at_01},
          {"froc_score", row.froc_score}, {"error", row.error}};
}

}  // namespace

std::vector<const ImageRecord*> select_records(const Dataset& dataset, std::string_view split) {
  if (split == "all") {
    std::vector<const ImageRecord*> out;
    for (const auto& r : dataset.records) out.push_back(&r);
    return out;
  }
  const auto which = parse_split(split);
  if (!which) throw UsageError("data.split must be train, val, test or all (got '" + std::string(split) + "')");
  return dataset.split(*which);
}

EvalReport evaluate_maps(std::span<const Heatmap> maps, std::span<const ImageRecord* const> records,
                         std::uint32_t input_size, const BoundParams& params,
                         std::size_t max_thresholds) {
  require(maps.size() == records.size(), "evaluate: maps and records are not aligned");
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    scores.push_back(image_score(maps[i]));
    labels.push_back(records[i]->positive() ? 1 : 0);
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(labels.size())) {
    throw DataError("evaluation needs both positive and negative images in the split");
  }
  EvalReport report;
  report.roc = roc_curve(scores, labels);
  const auto thresholds = sweep_thresholds(maps, max_thresholds);
  report.froc = froc(maps, records, input_size, params, thresholds);
  return report;
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : roc.points) out += fmt(p.threshold) + "," + fmt(p.fpr) + "," + fmt(p.tpr) + "\n";
  return out;
}

std::string froc_csv(const FrocCurve& froc) {
  std::string out = "threshold,fp_per_image,recall\n";
  for (const auto& p : froc.points) out += fmt(p.threshold) + "," + fmt(p.fp_per_image) + "," + fmt(p.recall) + "\n";
  return out;
}

std::string summary_json(const EvalReport& report) {
  json j = {{"auroc", report.roc.auroc},
            {"froc_score", report.froc.froc_score},
            {"recall_at_01", report.froc.recall_at_01}};
  return j.dump(2) + "\n";
}

std::string roc_svg(const RocCurve& roc) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : roc.points) pts.emplace_back(p.fpr, p.tpr);
  char title[64];
  std::snprintf(title, sizeof title, "ROC (AUROC %.4f)", roc.auroc);
  return svg_plot(pts, 1.0, "false positive rate", "true positive rate", title);
}

std::string froc_svg(const FrocCurve& froc) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : froc.points) {
    if (p.fp_per_image > 1.0) break;
    pts.emplace_back(p.fp_per_image, p.recall);
  }
  char title[64];
  std::snprintf(title, sizeof title, "FROC (score %.4f)", froc.froc_score);
  return svg_plot(pts, 1.0, "false positives per image", "recall", title);
}

std::vector<AblationCell> parse_grid(std::string_view text, const RunConfig& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("ablation grid: malformed JSON: ") + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw UsageError("ablation grid: expected a non-empty JSON array");
  const TrainConfig defaults = base.train();
  std::vector<AblationCell> cells;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& c = doc[i];
    const std::string where = "ablation grid[" + std::to_string(i) + "]";
    if (!c.is_object()) throw UsageError(where + ": expected an object");
    AblationCell cell{defaults.bounds, defaults.divergence, defaults.seed};
    for (const auto& [key, value] : c.items()) {
      if (key == "divergence") {
        if (!value.is_string()) throw UsageError(where + ".divergence: expected a string");
        cell.divergence = parse_divergence(value.get<std::string>());
      } else if (key == "seed") {
        if (!value.is_number_unsigned()) throw UsageError(where + ".seed: expected a non-negative integer");
        cell.seed = value.get<std::uint64_t>();
      } else {
        double* target = key == "tau"           ? &cell.bounds.tau
                         : key == "r_lower"     ? &cell.bounds.r_lower
                         : key == "r_upper"     ? &cell.bounds.r_upper
                         : key == "disk_radius" ? &cell.bounds.disk_radius
                                                : nullptr;
        if (target == nullptr) throw UsageError(where + ": unknown field '" + key + "'");
        if (!value.is_number()) throw UsageError(where + "." + key + ": expected a number");
        *target = value.get<double>();
      }
    }
    try {
      cell.bounds.check();
    } catch (const ContractError& e) {
      throw UsageError(where + ": " + e.what());
    }
    cells.push_back(cell);
  }
  return cells;
}

AblationRow run_ablation_cell(const RunConfig& base, const AblationCell& cell, const fs::path& cell_dir) {
  AblationRow row{cell, false, 0.0, 0.0, 0.0, {}};
  try {
    RunConfig config = cell_config(base, cell);
    config.set("out", cell_dir.string());
    prepare_out(config);
    const auto [dataset, root] = load_data(config);
    const ModelConfig model = resolve_model(config, dataset);
    const TrainConfig tc = config.train();
    const auto train_samples = load_samples(dataset.split(Split::kTrain), root, model.input_size);
    const auto val_samples = load_samples(dataset.split(Split::kVal), root, model.input_size);
    const auto test_records = dataset.split(Split::kTest);
    const auto test_samples = load_samples(test_records, root, model.input_size);

    const TrainResult trained = train(train_samples, val_samples, model, tc);
    trained.best.save(cell_dir / "model.wlkw");
    write_text(cell_dir / "train_log.csv", format_train_log(trained.log));
    const EvalReport report = evaluate_model(trained.best, test_samples, test_records, dataset.input_size, tc.bounds);
    write_text(cell_dir / "summary.json", summary_json(report));
    row.ok = true;
    row.auroc = report.roc.auroc;
    row.recall_at_01 = report.froc.recall_at_01;
    row.froc_score = report.froc.froc_score;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "tau,r_lower,r_upper,divergence,auroc,recall_at_01,froc_score\n";
  for (const auto& r : rows) {
    out += fmt(r.cell.bounds.tau) + "," + fmt(r.cell.bounds.r_lower) + "," + fmt(r.cell.bounds.r_upper) + "," +
           std::string(to_string(r.cell.divergence)) + ",";
    out += r.ok ? fmt(r.auroc) + "," + fmt(r.recall_at_01) + "," + fmt(r.froc_score) : "error,error,error";
    out += "\n";
  }
  return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, std::span<const AblationCell> grid,
                                      const fs::path& out_dir, std::size_t jobs) {
  auto cell_dir = [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", i);
    return out_dir / name;
  };
  std::vector<AblationRow> rows(grid.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) rows[i] = run_ablation_cell(base, grid[i], cell_dir(i));
    return rows;
  }

  // Process-level parallelism: each child runs one cell and leaves row.json.
  std::size_t next = 0;
  std::size_t running = 0;
  std::vector<pid_t> pids(grid.size(), -1);
  auto reap_one = [&] {
    int status = 0;
    if (::wait(&status) > 0) --running;
  };
  while (next < grid.size()) {
    if (running >= jobs) reap_one();
    const std::size_t i = next++;
    std::fflush(nullptr);
    const pid_t pid = ::fork();
    if (pid < 0) throw DataError("ablation: fork failed");
    if (pid == 0) {
      const AblationRow row = run_ablation_cell(base, grid[i], cell_dir(i));
      try {
        write_text(cell_dir(i) / "row.json", row_to_json(row).dump() + "\n");
      } catch (...) {
        ::_exit(1);
      }
      ::_exit(0);
    }
    pids[i] = pid;
    ++running;
  }
  while (running > 0) reap_one();

  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows[i].cell = grid[i];
    try {
      const auto bytes = read_file(cell_dir(i) / "row.json");
      const json j = json::parse(bytes.begin(), bytes.end());
      rows[i].ok = j.at("ok").get<bool>();
      rows[i].auroc = j.at("auroc").get<double>();
      rows[i].recall_at_01 = j.at("recall_at_01").get<double>();
      rows[i].froc_score = j.at("froc_score").get<double>();
      rows[i].error = j.at("error").get<std::string>();
    } catch (const std::exception& e) {
      rows[i].ok = false;
      rows[i].error = std::string("cell process failed: ") + e.what();
    }
  }
  return rows;
}

void cmd_synth(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  generate_corpus(config.synth(), out);
}

void cmd_bounds(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const BoundParams params = checked_bounds(config);
  const auto [dataset, root] = load_data(config);
  const ModelConfig model = resolve_model(config, dataset);
  for (const auto* record : select_records(dataset, config.get_string("data.split"))) {
    const auto points = points_in_input_space(*record, model.input_size);
    const auto levels = pyramid_bounds(points, model, params);
    const std::string stem = record_stem(*record);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const std::string level = ".l" + std::to_string(k + 1) + ".wlk";
      write_wlk(out / (stem + ".lower" + level), levels[k].lower);
      write_wlk(out / (stem + ".upper" + level), levels[k].upper);
    }
  }
}

void cmd_train(const RunConfig& config) {
  const TrainConfig tc = config.train();
  tc.check();
  const fs::path out = prepare_out(config);
  const auto [dataset, root] = load_data(config);
  const ModelConfig model = resolve_model(config, dataset);
  const auto train_records = dataset.split(Split::kTrain);
  const auto val_records = dataset.split(Split::kVal);
  if (train_records.empty() || val_records.empty()) {
    throw DataError("training needs non-empty train and val splits");
  }
  const auto train_samples = load_samples(train_records, root, model.input_size);
  const auto val_samples = load_samples(val_records, root, model.input_size);
  const TrainResult result = train(train_samples, val_samples, model, tc);
  result.best.save(out / "model.wlkw");
  write_text(out / "train_log.csv", format_train_log(result.log));
}

void cmd_infer(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const TinyNet net = TinyNet::load(existing_path(config, "infer.checkpoint"));
  const auto [dataset, root] = load_data(config);
  if (net.config().input_size != dataset.input_size) {
    throw DataError("checkpoint input_size " + std::to_string(net.config().input_size) +
                    " does not match the manifest input_size " + std::to_string(dataset.input_size));
  }
  const fs::path maps_dir = out / "heatmaps";
  fs::create_directories(maps_dir);
  for (const auto* record : select_records(dataset, config.get_string("data.split"))) {
    const Sample sample = load_sample(*record, root, dataset.input_size);
    write_wlk(maps_dir / (record_stem(*record) + ".wlk"), predict(net, sample.image));
  }
}

void cmd_eval(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const BoundParams params = checked_bounds(config);
  const auto [dataset, root] = load_data(config);
  const fs::path maps_dir = existing_path(config, "eval.heatmaps");
  const auto records = select_records(dataset, config.get_string("data.split"));
  std::vector<Heatmap> maps;
  for (const auto* record : records) maps.push_back(read_wlk(maps_dir / (record_stem(*record) + ".wlk")));
  const auto max_thresholds = config.get_int("eval.max_thresholds");
  if (max_thresholds < 2) throw UsageError("eval.max_thresholds must be at least 2");
  const EvalReport report =
      evaluate_maps(maps, records, dataset.input_size, params, static_cast<std::size_t>(max_thresholds));
  write_text(out / "roc.csv", roc_csv(report.roc));
  write_text(out / "froc.csv", froc_csv(report.froc));
  write_text(out / "summary.json", summary_json(report));
  if (config.get_bool("eval.svg")) {
    write_text(out / "roc.svg", roc_svg(report.roc));
    write_text(out / "froc.svg", froc_svg(report.froc));
  }
}

void cmd_curves(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const std::string input = config.get_string("curves.input");
  const fs::path in_dir = input.empty() ? out : fs::path(input);

  RocCurve roc;
  const fs::path roc_path = in_dir / "roc.csv";
  for (const auto& row : read_csv(roc_path)) {
    if (row.size() != 3) throw DataError(roc_path.string() + ": expected 3 columns");
    roc.points.push_back({parse_cell(row[0], roc_path), parse_cell(row[1], roc_path), parse_cell(row[2], roc_path)});
  }
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    const auto& a = roc.points[k - 1];
    const auto& b = roc.points[k];
    roc.auroc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }

  FrocCurve froc;
  const fs::path froc_path = in_dir / "froc.csv";
  for (const auto& row : read_csv(froc_path)) {
    if (row.size() != 3) throw DataError(froc_path.string() + ": expected 3 columns");
    FrocPoint p;
    p.threshold = parse_cell(row[0], froc_path);
    p.fp_per_image = parse_cell(row[1], froc_path);
    p.recall = parse_cell(row[2], froc_path);
    froc.points.push_back(p);
  }
  double sum = 0.0;
  for (double r : kFrocRates) sum += froc.recall_at(r);
  froc.froc_score = sum / std::size(kFrocRates);
  froc.recall_at_01 = froc.recall_at(0.1);

  write_text(out / "roc.svg", roc_svg(roc));
  write_text(out / "froc.svg", froc_svg(froc));
}

void cmd_ablate(const RunConfig& config) {
  const fs::path grid_path = existing_path(config, "ablate.grid");
  existing_path(config, "data.manifest");
  const auto bytes = read_file(grid_path);
  const auto grid = parse_grid(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), config);
  const auto jobs = config.get_int("ablate.jobs");
  if (jobs < 1) throw UsageError("ablate.jobs must be at least 1");
  const fs::path out = prepare_out(config);
  const auto rows = run_ablation(config, grid, out, static_cast<std::size_t>(jobs));
  write_text(out / "ablation.csv", ablation_csv(rows));
}

std::span<const std::string_view> command_names() { return kCommands; }

void run_command(std::string_view command, const RunConfig& config) {
  if (command == "synth") return cmd_synth(config);
  if (command == "bounds") return cmd_bounds(config);
  if (command == "train") return cmd_train(config);
  if (command == "infer") return cmd_infer(config);
  if (command == "eval") return cmd_eval(config);
  if (command == "curves") return cmd_curves(config);
  if (command == "ablate") return cmd_ablate(config);
  throw UsageError("unknown command '" + std::string(command) + "'");
}

}  // namespace wlk
