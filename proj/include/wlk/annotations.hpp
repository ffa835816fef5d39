#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wlk/heatmap.hpp"

namespace wlk {

/// Image-space point. x is the column, y the row; pixel centers sit at
/// integer coordinates with the origin at the top-left pixel.
struct PointAnnotation {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const PointAnnotation&) const = default;
};

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct ImageRecord {
  std::string image_path;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<PointAnnotation> points;
  Split split = Split::kTrain;

  /// Image-level label: any annotated point makes the image positive.
  bool positive() const noexcept { return !points.empty(); }

  bool operator==(const ImageRecord&) const = default;
};

struct Dataset {
  std::vector<ImageRecord> records;
  std::uint32_t input_size = 0;

  std::vector<const ImageRecord*> split(Split which) const;

  bool operator==(const Dataset&) const = default;
};

struct Violation {
  std::size_t record = 0;
  std::optional<std::size_t> point;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Checks every Dataset invariant. `coarsest_stride` is the largest model
/// downsampling factor that input_size must be divisible by.
ValidationReport validate(const Dataset& dataset, std::uint32_t coarsest_stride = 1);

/// Parses the JSON manifest. Throws DataError on malformed JSON (with line
/// number), schema mismatches (with the offending field) and the first
/// validation violation.
Dataset parse_manifest(std::string_view text);
Dataset load_manifest(const std::filesystem::path& path);

/// Inverse of parse_manifest; deterministic byte output.
std::string serialize_manifest(const Dataset& dataset);

/// Maps an original-image point through pad-to-square (symmetric, odd pixel
/// on the trailing side) followed by isotropic resize to `input_size`.
PointAnnotation to_input_space(PointAnnotation p, std::uint32_t width, std::uint32_t height,
                               std::uint32_t input_size);
PointAnnotation from_input_space(PointAnnotation p, std::uint32_t width, std::uint32_t height,
                                 std::uint32_t input_size);

std::vector<PointAnnotation> points_in_input_space(const ImageRecord& record,
                                                   std::uint32_t input_size);

/// Applies the same pad-and-resize to pixel data (zero padding, bilinear
/// sampling consistent with to_input_space).
Heatmap to_input_image(const Heatmap& image, std::uint32_t input_size);

/// File-name-safe identifier for a record, used for per-image artifacts.
std::string record_stem(const ImageRecord& record);

}  // namespace wlk
