#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wlk/supervision.hpp"
#include "wlk/synthgen.hpp"
#include "wlk/tinynet.hpp"
#include "wlk/train.hpp"

namespace wlk {

enum class KeyType { kString, kInt, kReal, kBool, kIntList };

struct ConfigKey {
  std::string_view name;
  KeyType type;
  std::string_view default_value;
  std::string_view doc;
};

/// Every recognized configuration key, in display order.
std::span<const ConfigKey> config_keys();

/// Flat dotted-key run configuration (`bounds.r_lower`, `train.epochs`, ...).
/// Starts from documented defaults; a JSON config file and then individual
/// overrides are layered on top.
class RunConfig {
 public:
  RunConfig();

  /// Parses `value` according to the key's type. Throws UsageError for
  /// unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);

  /// Merges a flat JSON object; values may be native JSON or strings.
  void merge_json(std::string_view text);
  void merge_file(const std::filesystem::path& path);

  std::string get_string(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  double get_real(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  /// Canonical JSON (sorted keys, typed values).
  std::string to_json() const;

  SynthConfig synth() const;
  /// input_size 0 means "take it from the manifest".
  ModelConfig model() const;
  TrainConfig train() const;
  BoundParams bounds() const;

 private:
  void assign(const ConfigKey& key, const nlohmann::json& value);
  const nlohmann::json& lookup(std::string_view key) const;

  nlohmann::json values_;
};

}  // namespace wlk
