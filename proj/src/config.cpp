#include "wlk/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "wlk/error.hpp"

namespace wlk {
namespace {

using nlohmann::json;

constexpr ConfigKey kKeys[] = {
    {"out", KeyType::kString, "", "output directory for this run (required)"},
    {"data.manifest", KeyType::kString, "", "manifest JSON (bounds/train/infer/eval/ablate)"},
    {"data.split", KeyType::kString, "test", "records used by bounds/infer/eval: train|val|test|all"},
    {"synth.seed", KeyType::kInt, "0", "corpus seed"},
    {"synth.image_size", KeyType::kInt, "128", "square image side, pixels"},
    {"synth.n_positive", KeyType::kInt, "100", "images with at least one crack"},
    {"synth.n_negative", KeyType::kInt, "100", "images without cracks"},
    {"synth.cracks_min", KeyType::kInt, "1", "min cracks per positive image"},
    {"synth.cracks_max", KeyType::kInt, "3", "max cracks per positive image"},
    {"synth.crack_length_min", KeyType::kReal, "18", "min crack length, pixels"},
    {"synth.crack_length_max", KeyType::kReal, "36", "max crack length, pixels"},
    {"synth.crack_contrast_min", KeyType::kReal, "0.15", "min crack darkening"},
    {"synth.crack_contrast_max", KeyType::kReal, "0.35", "max crack darkening"},
    {"synth.distractors_min", KeyType::kInt, "1", "min smooth dark arcs per image"},
    {"synth.distractors_max", KeyType::kInt, "2", "max smooth dark arcs per image"},
    {"synth.distractor_contrast_min", KeyType::kReal, "0.1", "min arc darkening"},
    {"synth.distractor_contrast_max", KeyType::kReal, "0.3", "max arc darkening"},
    {"synth.bands", KeyType::kInt, "3", "background band count"},
    {"synth.band_amplitude", KeyType::kReal, "0.12", "background band amplitude"},
    {"synth.noise_sigma", KeyType::kReal, "0.02", "additive Gaussian noise sigma"},
    {"synth.split_points", KeyType::kBool, "false", "annotate long cracks with two jittered points"},
    {"model.input_size", KeyType::kInt, "0", "model input side; 0 = manifest input_size"},
    {"model.base_channels", KeyType::kInt, "16", "channels of the first encoder stage and the pyramid"},
    {"model.strides", KeyType::kIntList, "2,4,8,16", "pyramid strides (2,4,8,... only)"},
    {"model.seed", KeyType::kInt, "0", "weight initialization seed"},
    {"train.lr", KeyType::kReal, "0.001", "Adam learning rate"},
    {"train.weight_decay", KeyType::kReal, "0.001", "decoupled weight decay"},
    {"train.batch_size", KeyType::kInt, "8", "images per optimizer step"},
    {"train.epochs", KeyType::kInt, "40", "passes over the train split (>= 1)"},
    {"train.divergence", KeyType::kString, "mse", "window loss divergence: mse|kld"},
    {"train.seed", KeyType::kInt, "0", "shuffling and augmentation seed"},
    {"train.hflip", KeyType::kBool, "true", "random horizontal flip (p=0.5)"},
    {"train.rotate", KeyType::kBool, "true", "random rotation, +-10 degrees"},
    {"train.intensity_jitter", KeyType::kBool, "true", "random intensity shift, +-0.1"},
    {"train.contrast_jitter", KeyType::kBool, "true", "random contrast scale in [0.9, 1.1]"},
    {"bounds.r_lower", KeyType::kReal, "6.25", "lower-bound radius, input pixels"},
    {"bounds.r_upper", KeyType::kReal, "25", "upper-bound radius, input pixels"},
    {"bounds.tau", KeyType::kReal, "0.25", "bound softness, input pixels"},
    {"bounds.disk_radius", KeyType::kReal, "6.25", "evaluation disk-mask radius, input pixels"},
    {"infer.checkpoint", KeyType::kString, "", "model checkpoint for infer"},
    {"eval.heatmaps", KeyType::kString, "", "directory of <stem>.wlk merged heatmaps"},
    {"eval.max_thresholds", KeyType::kInt, "512", "max distinct map values in the FROC sweep"},
    {"eval.svg", KeyType::kBool, "true", "also write roc.svg and froc.svg"},
    {"curves.input", KeyType::kString, "", "directory with roc.csv/froc.csv; empty = out"},
    {"ablate.grid", KeyType::kString, "", "JSON array of grid cells"},
    {"ablate.jobs", KeyType::kInt, "1", "cells run concurrently as separate processes"},
};

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

json parse_text(const ConfigKey& key, std::string_view text) {
  const auto bad = [&] {
    return UsageError("config key '" + std::string(key.name) + "': cannot parse '" + std::string(text) + "'");
  };
  switch (key.type) {
    case KeyType::kString:
      return std::string(text);
    case KeyType::kInt: {
      std::int64_t v = 0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) throw bad();
      return v;
    }
    case KeyType::kReal: {
      try {
        std::size_t used = 0;
        const double v = std::stod(std::string(text), &used);
        if (used != text.size()) throw bad();
        return v;
      } catch (const std::logic_error&) {
        throw bad();
      }
    }
    case KeyType::kBool:
      if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
      if (text == "false" || text == "0" || text == "no" || text == "off") return false;
      throw bad();
    case KeyType::kIntList: {
      json list = json::array();
      std::stringstream ss{std::string(text)};
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) throw bad();
        list.push_back(v);
      }
      if (list.empty()) throw bad();
      return list;
    }
  }
  throw bad();
}

std::size_t non_negative(std::int64_t v, std::string_view key) {
  if (v < 0) throw UsageError("config key '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

RunConfig::RunConfig() : values_(json::object()) {
  for (const auto& k : kKeys) values_[std::string(k.name)] = parse_text(k, k.default_value);
}

void RunConfig::assign(const ConfigKey& key, const json& value) {
  if (value.is_string()) {
    values_[std::string(key.name)] = parse_text(key, value.get<std::string>());
    return;
  }
  const bool ok = (key.type == KeyType::kInt && value.is_number_integer()) ||
                  (key.type == KeyType::kReal && value.is_number()) ||
                  (key.type == KeyType::kBool && value.is_boolean()) ||
                  (key.type == KeyType::kIntList && value.is_array() && !value.empty() &&
                   std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_number_integer(); }));
  if (!ok) throw UsageError("config key '" + std::string(key.name) + "' has the wrong type");
  values_[std::string(key.name)] = key.type == KeyType::kReal ? json(value.get<double>()) : value;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const ConfigKey* k = find_key(key);
  if (k == nullptr) throw UsageError("unknown config key '" + std::string(key) + "'");
  values_[std::string(k->name)] = parse_text(*k, value);
}

void RunConfig::merge_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config: expected a flat JSON object");
  for (const auto& [name, value] : doc.items()) {
    const ConfigKey* k = find_key(name);
    if (k == nullptr) throw UsageError("config: unknown key '" + name + "'");
    assign(*k, value);
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  merge_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

const json& RunConfig::lookup(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  return *it;
}

std::string RunConfig::get_string(std::string_view key) const { return lookup(key).get<std::string>(); }
std::int64_t RunConfig::get_int(std::string_view key) const { return lookup(key).get<std::int64_t>(); }
double RunConfig::get_real(std::string_view key) const { return lookup(key).get<double>(); }
bool RunConfig::get_bool(std::string_view key) const { return lookup(key).get<bool>(); }

std::string RunConfig::to_json() const { return values_.dump(2) + "\n"; }

SynthConfig RunConfig::synth() const {
  SynthConfig c;
  c.seed = static_cast<std::uint64_t>(get_int("synth.seed"));
  c.image_size = static_cast<std::uint32_t>(non_negative(get_int("synth.image_size"), "synth.image_size"));
  c.n_positive = non_negative(get_int("synth.n_positive"), "synth.n_positive");
  c.n_negative = non_negative(get_int("synth.n_negative"), "synth.n_negative");
  c.cracks_min = non_negative(get_int("synth.cracks_min"), "synth.cracks_min");
  c.cracks_max = non_negative(get_int("synth.cracks_max"), "synth.cracks_max");
  c.crack_length_min = get_real("synth.crack_length_min");
  c.crack_length_max = get_real("synth.crack_length_max");
  c.crack_contrast_min = get_real("synth.crack_contrast_min");
  c.crack_contrast_max = get_real("synth.crack_contrast_max");
  c.distractors_min = non_negative(get_int("synth.distractors_min"), "synth.distractors_min");
  c.distractors_max = non_negative(get_int("synth.distractors_max"), "synth.distractors_max");
  c.distractor_contrast_min = get_real("synth.distractor_contrast_min");
  c.distractor_contrast_max = get_real("synth.distractor_contrast_max");
  c.bands = non_negative(get_int("synth.bands"), "synth.bands");
  c.band_amplitude = get_real("synth.band_amplitude");
  c.noise_sigma = get_real("synth.noise_sigma");
  c.split_points = get_bool("synth.split_points");
  return c;
}

ModelConfig RunConfig::model() const {
  ModelConfig c;
  c.input_size = static_cast<std::uint32_t>(non_negative(get_int("model.input_size"), "model.input_size"));
  c.base_channels = static_cast<std::uint32_t>(non_negative(get_int("model.base_channels"), "model.base_channels"));
  c.strides.clear();
  for (const auto& v : lookup("model.strides")) {
    c.strides.push_back(static_cast<std::uint32_t>(non_negative(v.get<std::int64_t>(), "model.strides")));
  }
  c.seed = static_cast<std::uint64_t>(get_int("model.seed"));
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.lr = get_real("train.lr");
  c.weight_decay = get_real("train.weight_decay");
  c.batch_size = non_negative(get_int("train.batch_size"), "train.batch_size");
  c.epochs = non_negative(get_int("train.epochs"), "train.epochs");
  c.divergence = parse_divergence(get_string("train.divergence"));
  c.seed = static_cast<std::uint64_t>(get_int("train.seed"));
  c.augment.hflip = get_bool("train.hflip");
  c.augment.rotate = get_bool("train.rotate");
  c.augment.intensity_jitter = get_bool("train.intensity_jitter");
  c.augment.contrast_jitter = get_bool("train.contrast_jitter");
  c.bounds = bounds();
  return c;
}

BoundParams RunConfig::bounds() const {
  return {get_real("bounds.r_lower"), get_real("bounds.r_upper"), get_real("bounds.tau"),
          get_real("bounds.disk_radius")};
}

}  // namespace wlk
