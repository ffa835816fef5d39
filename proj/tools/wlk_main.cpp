// wlk: command-line front end over the windowloss C API.

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "wlk/wlk.h"

namespace {

struct Alias {
  const char* flag;
  std::vector<const char*> keys;
  const char* doc;
};

// Short spellings for the settings each command needs most often.
std::vector<Alias> aliases_for(const std::string& command) {
  std::vector<Alias> out{{"--out", {"out"}, "same as --set out=..."}};
  if (command == "synth") {
    out.push_back({"--seed", {"synth.seed"}, "corpus seed"});
    out.push_back({"--split-points", {"synth.split_points"}, "true|false"});
    return out;
  }
  if (command != "curves") out.push_back({"--manifest", {"data.manifest"}, "manifest JSON"});
  if (command == "bounds" || command == "infer" || command == "eval") {
    out.push_back({"--split", {"data.split"}, "train|val|test|all"});
  }
  if (command == "train" || command == "ablate") {
    out.push_back({"--seed", {"train.seed", "model.seed"}, "training and initialization seed"});
    out.push_back({"--epochs", {"train.epochs"}, "passes over the train split"});
    out.push_back({"--divergence", {"train.divergence"}, "mse|kld"});
  }
  if (command == "infer") out.push_back({"--checkpoint", {"infer.checkpoint"}, "model checkpoint"});
  if (command == "eval") out.push_back({"--heatmaps", {"eval.heatmaps"}, "heatmap directory"});
  if (command == "curves") out.push_back({"--input", {"curves.input"}, "directory with roc.csv/froc.csv"});
  if (command == "ablate") {
    out.push_back({"--grid", {"ablate.grid"}, "grid JSON file"});
    out.push_back({"--jobs", {"ablate.jobs"}, "concurrent cells"});
  }
  return out;
}

std::string keys_footer() {
  std::string text = "Configuration keys (--<key> VALUE, --set key=value, or a --config JSON file):\n";
  for (size_t i = 0; i < wlk_config_key_count(); ++i) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-30s default: %-10s %s\n", wlk_config_key_name(i),
                  *wlk_config_key_default(i) ? wlk_config_key_default(i) : "\"\"", wlk_config_key_doc(i));
    text += line;
  }
  return text;
}

const char* command_doc(const std::string& command) {
  if (command == "synth") return "Generate a synthetic crack corpus and its manifest";
  if (command == "bounds") return "Write per-level lower/upper bound maps for a split";
  if (command == "train") return "Train the pyramid network with the Window Loss";
  if (command == "infer") return "Write merged probability maps for a split";
  if (command == "eval") return "Compute ROC/FROC metrics from heatmaps";
  if (command == "curves") return "Render ROC/FROC SVG plots from CSV files";
  if (command == "ablate") return "Train and evaluate one model per grid cell";
  return "";
}

struct Settings {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> overrides;  // key, value
};

struct ConfigDeleter {
  void operator()(wlk_config* c) const { wlk_config_free(c); }
};

int fail(const std::string& command, int status) {
  std::cerr << "wlk " << command << ": error: " << wlk_last_error() << "\n";
  return status;
}

int run(const std::string& command, const Settings& settings) {
  wlk_config* raw = nullptr;
  if (wlk_config_create(&raw) != WLK_OK) return fail(command, WLK_ERROR_INTERNAL);
  std::unique_ptr<wlk_config, ConfigDeleter> config(raw);

  if (!settings.config_file.empty()) {
    if (const auto s = wlk_config_load_file(config.get(), settings.config_file.c_str()); s != WLK_OK) {
      return fail(command, s);
    }
  }
  for (const auto& [key, value] : settings.overrides) {
    if (const auto s = wlk_config_set(config.get(), key.c_str(), value.c_str()); s != WLK_OK) return fail(command, s);
  }
  for (const auto& assignment : settings.sets) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
      std::cerr << "wlk " << command << ": error: --set expects key=value, got '" << assignment << "'\n";
      return WLK_ERROR_USAGE;
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    if (const auto s = wlk_config_set(config.get(), key.c_str(), value.c_str()); s != WLK_OK) return fail(command, s);
  }
  if (const auto s = wlk_run(command.c_str(), config.get()); s != WLK_OK) return fail(command, s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Window Loss crack localization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wlk (abi " + std::to_string(wlk_abi_version()) + ")");

  const std::string footer = keys_footer();
  std::map<std::string, Settings> settings;
  struct Bound {
    CLI::App* owner;
    CLI::Option* option;
    std::vector<std::string> keys;
    std::unique_ptr<std::string> value;
  };
  std::vector<Bound> bound;

  for (size_t c = 0; c < wlk_command_count(); ++c) {
    const std::string name = wlk_command_name(c);
    CLI::App* sub = app.add_subcommand(name, command_doc(name));
    sub->footer(footer);
    Settings& s = settings[name];
    sub->add_option("--config", s.config_file, "JSON config file with flat dotted keys");
    sub->add_option("--set", s.sets, "override one key, key=value (repeatable)");
    for (const auto& alias : aliases_for(name)) {
      auto value = std::make_unique<std::string>();
      CLI::Option* opt = sub->add_option(alias.flag, *value, alias.doc);
      bound.push_back({sub, opt, {alias.keys.begin(), alias.keys.end()}, std::move(value)});
    }
    for (size_t i = 0; i < wlk_config_key_count(); ++i) {
      const std::string key = wlk_config_key_name(i);
      if (sub->get_option_no_throw("--" + key) != nullptr) continue;
      auto value = std::make_unique<std::string>();
      CLI::Option* opt = sub->add_option("--" + key, *value)->group("");
      bound.push_back({sub, opt, {key}, std::move(value)});
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "wlk: error: " << e.what() << "\n";
    return WLK_ERROR_USAGE;
  }

  for (auto* sub : app.get_subcommands()) {
    const std::string name = sub->get_name();
    Settings& s = settings[name];
    // Aliases first, then per-key options; --set entries are applied last.
    for (const auto& b : bound) {
      if (b.owner != sub || b.option->count() == 0) continue;
      for (const auto& key : b.keys) s.overrides.emplace_back(key, *b.value);
    }
    return run(name, s);
  }
  return WLK_ERROR_USAGE;
}
