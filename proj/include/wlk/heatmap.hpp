#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wlk {

/// Dense row-major grid of doubles. Used for images, bounds, masks and
/// probability maps alike.
struct Heatmap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  bool same_shape(const Heatmap& other) const noexcept {
    return rows == other.rows && cols == other.cols;
  }

  bool operator==(const Heatmap&) const = default;
};

// Raw float32 grid: "WLK0" | u32 rows | u32 cols | u32 reserved | f32 LE data.
std::vector<std::uint8_t> encode_wlk(const Heatmap& map);
Heatmap decode_wlk(std::span<const std::uint8_t> bytes);
void write_wlk(const std::filesystem::path& path, const Heatmap& map);
Heatmap read_wlk(const std::filesystem::path& path);

/// Binary PGM (P5), 8- or 16-bit. Values are normalized to [0, 1].
Heatmap decode_pgm(std::span<const std::uint8_t> bytes);
/// Writes an 8-bit P5 image; values are clamped to [0, 1] and quantized.
void write_pgm(const std::filesystem::path& path, const Heatmap& image);

/// Loads a grayscale image, dispatching on the file magic (P5 or WLK0).
Heatmap load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace wlk
