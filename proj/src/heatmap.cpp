#include "wlk/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wlk/error.hpp"

namespace wlk {
namespace {

static_assert(std::endian::native == std::endian::little,
              "raw grid I/O assumes a little-endian host");

constexpr char kWlkMagic[4] = {'W', 'L', 'K', '0'};
constexpr std::size_t kWlkHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) token.push_back(static_cast<char>(bytes[pos++]));
  return token;
}

std::size_t pgm_number(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  const std::string tok = pgm_token(bytes, pos);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit)) {
    throw DataError("PGM: malformed header field '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace

std::vector<std::uint8_t> encode_wlk(const Heatmap& map) {
  std::vector<std::uint8_t> out;
  out.reserve(kWlkHeader + 4 * map.size());
  out.insert(out.end(), std::begin(kWlkMagic), std::end(kWlkMagic));
  put_u32(out, static_cast<std::uint32_t>(map.rows));
  put_u32(out, static_cast<std::uint32_t>(map.cols));
  put_u32(out, 0);
  for (double v : map.values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    put_u32(out, bits);
  }
  return out;
}

Heatmap decode_wlk(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWlkHeader || std::memcmp(bytes.data(), kWlkMagic, 4) != 0) {
    throw DataError("WLK0: bad magic or truncated header");
  }
  const std::size_t rows = get_u32(bytes, 4);
  const std::size_t cols = get_u32(bytes, 8);
  if (bytes.size() != kWlkHeader + 4 * rows * cols) {
    throw DataError("WLK0: payload size does not match " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
  Heatmap map(rows, cols);
  for (std::size_t i = 0; i < map.size(); ++i) {
    map.values[i] = std::bit_cast<float>(get_u32(bytes, kWlkHeader + 4 * i));
  }
  return map;
}

void write_wlk(const std::filesystem::path& path, const Heatmap& map) {
  write_file(path, encode_wlk(map));
}

Heatmap read_wlk(const std::filesystem::path& path) {
  try {
    return decode_wlk(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Heatmap decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (pgm_token(bytes, pos) != "P5") throw DataError("PGM: only binary P5 is supported");
  const std::size_t width = pgm_number(bytes, pos);
  const std::size_t height = pgm_number(bytes, pos);
  const std::size_t maxval = pgm_number(bytes, pos);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw DataError("PGM: invalid dimensions or maxval");
  }
  ++pos;  // single whitespace before raster
  const std::size_t depth = maxval < 256 ? 1 : 2;
  if (bytes.size() < pos + width * height * depth) throw DataError("PGM: truncated raster");

  Heatmap image(height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < image.size(); ++i) {
    std::size_t v = bytes[pos + depth * i];
    if (depth == 2) v = (v << 8) | bytes[pos + 2 * i + 1];  // big-endian samples
    image.values[i] = std::min(1.0, static_cast<double>(v) * scale);
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const Heatmap& image) {
  const std::string header =
      "P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (double v : image.values) {
    const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    out.push_back(static_cast<std::uint8_t>(q));
  }
  write_file(path, out);
}

Heatmap load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kWlkMagic, 4) == 0) return decode_wlk(bytes);
    return decode_pgm(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace wlk
