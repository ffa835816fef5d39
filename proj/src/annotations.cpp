#include "wlk/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "wlk/error.hpp"

namespace wlk {
namespace {

using nlohmann::json;

struct Padding {
  double left = 0.0;
  double top = 0.0;
  double side = 0.0;
};

// Symmetric padding; the extra pixel of an odd difference goes to the
// trailing (right/bottom) side.
Padding square_padding(std::uint32_t width, std::uint32_t height) {
  const std::uint32_t side = std::max(width, height);
  return {static_cast<double>((side - width) / 2), static_cast<double>((side - height) / 2),
          static_cast<double>(side)};
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

[[noreturn]] void field_error(const std::string& where, const std::string& what) {
  throw DataError("manifest: " + where + ": " + what);
}

std::uint32_t as_dimension(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<std::int64_t>() <= 0 ||
      j.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
    field_error(where, "expected a positive integer");
  }
  return static_cast<std::uint32_t>(j.get<std::int64_t>());
}

const json& member(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) field_error(where, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

std::vector<const ImageRecord*> Dataset::split(Split which) const {
  std::vector<const ImageRecord*> out;
  for (const auto& r : records) {
    if (r.split == which) out.push_back(&r);
  }
  return out;
}

ValidationReport validate(const Dataset& dataset, std::uint32_t coarsest_stride) {
  ValidationReport report;
  if (dataset.input_size == 0 || coarsest_stride == 0 ||
      dataset.input_size % coarsest_stride != 0) {
    report.push_back({0, std::nullopt,
                      "input_size " + std::to_string(dataset.input_size) +
                          " must be positive and divisible by " + std::to_string(coarsest_stride)});
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    if (!seen.insert(r.image_path).second) {
      report.push_back({i, std::nullopt, "duplicate image path '" + r.image_path + "'"});
    }
    if (r.width == 0 || r.height == 0) {
      report.push_back({i, std::nullopt, "record '" + r.image_path + "' has zero size"});
    }
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      const auto& p = r.points[k];
      const bool inside = std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 &&
                          p.y >= 0.0 && p.x < r.width && p.y < r.height;
      if (!inside) {
        report.push_back({i, k,
                          "record '" + r.image_path + "' point " + std::to_string(k) +
                              " lies outside the " + std::to_string(r.width) + "x" +
                              std::to_string(r.height) + " image"});
      }
    }
  }
  return report;
}

Dataset parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("manifest: malformed JSON at line " +
                    std::to_string(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " +
                    e.what());
  }
  if (!doc.is_object()) field_error("<root>", "expected an object");

  Dataset dataset;
  dataset.input_size = as_dimension(member(doc, "input_size", "<root>"), "input_size");
  const json& records = member(doc, "records", "<root>");
  if (!records.is_array()) field_error("records", "expected an array");

  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = "records[" + std::to_string(i) + "]";
    const json& rec = records[i];
    if (!rec.is_object()) field_error(where, "expected an object");

    ImageRecord record;
    const json& image = member(rec, "image", where);
    if (!image.is_string()) field_error(where + ".image", "expected a string");
    record.image_path = image.get<std::string>();
    record.width = as_dimension(member(rec, "width", where), where + ".width");
    record.height = as_dimension(member(rec, "height", where), where + ".height");

    const json& split = member(rec, "split", where);
    const auto parsed = split.is_string() ? parse_split(split.get<std::string>()) : std::nullopt;
    if (!parsed) field_error(where + ".split", "expected one of train|val|test");
    record.split = *parsed;

    const json& points = member(rec, "points", where);
    if (!points.is_array()) field_error(where + ".points", "expected an array");
    for (std::size_t k = 0; k < points.size(); ++k) {
      const json& pt = points[k];
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        field_error(where + ".points[" + std::to_string(k) + "]", "expected [x, y]");
      }
      record.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    dataset.records.push_back(std::move(record));
  }

  const auto report = validate(dataset);
  if (!report.empty()) throw DataError("manifest: " + report.front().message);
  return dataset;
}

Dataset load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_manifest(const Dataset& dataset) {
  json records = json::array();
  for (const auto& r : dataset.records) {
    json points = json::array();
    for (const auto& p : r.points) points.push_back({p.x, p.y});
    // nlohmann's object keys are sorted, so output is canonical.
    records.push_back({{"image", r.image_path},
                       {"width", r.width},
                       {"height", r.height},
                       {"split", std::string(to_string(r.split))},
                       {"points", std::move(points)}});
  }
  json doc = {{"input_size", dataset.input_size}, {"records", std::move(records)}};
  return doc.dump(1) + "\n";
}

PointAnnotation to_input_space(PointAnnotation p, std::uint32_t width, std::uint32_t height,
                               std::uint32_t input_size) {
  const Padding pad = square_padding(width, height);
  const double scale = static_cast<double>(input_size) / pad.side;
  return {(p.x + pad.left) * scale, (p.y + pad.top) * scale};
}

PointAnnotation from_input_space(PointAnnotation p, std::uint32_t width, std::uint32_t height,
                                 std::uint32_t input_size) {
  const Padding pad = square_padding(width, height);
  const double scale = pad.side / static_cast<double>(input_size);
  return {p.x * scale - pad.left, p.y * scale - pad.top};
}

std::vector<PointAnnotation> points_in_input_space(const ImageRecord& record,
                                                   std::uint32_t input_size) {
  std::vector<PointAnnotation> out;
  out.reserve(record.points.size());
  for (const auto& p : record.points) {
    out.push_back(to_input_space(p, record.width, record.height, input_size));
  }
  return out;
}

Heatmap to_input_image(const Heatmap& image, std::uint32_t input_size) {
  require(!image.empty(), "to_input_image: empty image");
  const auto width = static_cast<std::uint32_t>(image.cols);
  const auto height = static_cast<std::uint32_t>(image.rows);
  if (width == height && width == input_size) return image;

  Heatmap out(input_size, input_size);
  const auto sample = [&](double x, double y) {
    // Zero outside the original raster (the padded margin).
    if (x < -0.5 || y < -0.5 || x > width - 0.5 || y > height - 0.5) return 0.0;
    const double cx = std::clamp(x, 0.0, width - 1.0);
    const double cy = std::clamp(y, 0.0, height - 1.0);
    const auto x0 = static_cast<std::size_t>(std::floor(cx));
    const auto y0 = static_cast<std::size_t>(std::floor(cy));
    const std::size_t x1 = std::min<std::size_t>(x0 + 1, width - 1);
    const std::size_t y1 = std::min<std::size_t>(y0 + 1, height - 1);
    const double fx = cx - x0;
    const double fy = cy - y0;
    return (1 - fy) * ((1 - fx) * image(y0, x0) + fx * image(y0, x1)) +
           fy * ((1 - fx) * image(y1, x0) + fx * image(y1, x1));
  };
  for (std::size_t r = 0; r < input_size; ++r) {
    for (std::size_t c = 0; c < input_size; ++c) {
      const auto src = from_input_space({static_cast<double>(c), static_cast<double>(r)}, width,
                                        height, input_size);
      out(r, c) = sample(src.x, src.y);
    }
  }
  return out;
}

std::string record_stem(const ImageRecord& record) {
  std::filesystem::path p(record.image_path);
  std::string stem = (p.parent_path() / p.stem()).generic_string();
  std::replace_if(stem.begin(), stem.end(), [](char c) { return c == '/' || c == '\\' || c == ':'; }, '_');
  return stem;
}

}  // namespace wlk
