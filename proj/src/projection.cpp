#include "cellomaps/projection.hpp"

#include <algorithm>
#include <cmath>

#include "cellomaps/csv.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/format.hpp"

namespace cellomaps {

PatternOverlay build_overlay(std::span<const PredictionRecord> predictions, std::uint32_t map_width,
                             std::uint32_t map_height, std::uint32_t tile_size) {
  if (tile_size == 0) throw Error(ErrorCode::InvalidArgument, "tile size must be positive");
  PatternOverlay o;
  o.map_width = map_width;
  o.map_height = map_height;
  o.tile_size = tile_size;
  o.grid_width = map_width / tile_size;
  o.grid_height = map_height / tile_size;
  o.cells.assign(std::size_t{o.grid_width} * o.grid_height, kUnclassified);
  std::vector<bool> seen(o.cells.size(), false);
  for (const auto& p : predictions) {
    if (p.x % tile_size != 0 || p.y % tile_size != 0 || p.x / tile_size >= o.grid_width ||
        p.y / tile_size >= o.grid_height) {
      throw Error(ErrorCode::OffGridOrigin, "tile origin (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                                ") is not on the " + std::to_string(tile_size) + "-pixel grid");
    }
    const std::size_t cell = std::size_t{p.y / tile_size} * o.grid_width + p.x / tile_size;
    if (seen[cell]) {
      throw Error(ErrorCode::DuplicateCoordinate,
                  "two predictions for origin (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
    }
    seen[cell] = true;
    o.cells[cell] = argmax(p.probabilities);
  }
  return o;
}

const Palette& default_palette() {
  static const Palette palette{{{
                                   {255, 255, 0},  // Lepidic
                                   {255, 165, 0},  // Acinar
                                   {0, 255, 255},  // Papillary
                                   {255, 0, 255},  // Micropapillary
                                   {139, 0, 0},    // Solid
                                   {0, 255, 0},    // Normal
                               }},
                               {0, 0, 0}};
  return palette;
}

nlohmann::json legend_json(const Palette& palette, std::uint32_t block) {
  nlohmann::json classes = nlohmann::json::object();
  auto rgb = [](Rgb c) { return nlohmann::json::array({c.r, c.g, c.b}); };
  for (std::size_t k = 0; k < kPatternCount; ++k) classes[std::string(to_string(kAllPatterns[k]))] = rgb(palette.classes[k]);
  classes["unclassified"] = rgb(palette.unclassified);
  return {{"block", block}, {"palette", classes}};
}

Palette palette_from_json(const nlohmann::json& legend) {
  try {
    const auto& classes = legend.at("palette");
    auto rgb = [](const nlohmann::json& v) {
      if (!v.is_array() || v.size() != 3) throw Error(ErrorCode::MalformedInput, "colour must be [r, g, b]");
      return Rgb{v[0].get<std::uint8_t>(), v[1].get<std::uint8_t>(), v[2].get<std::uint8_t>()};
    };
    Palette p;
    for (std::size_t k = 0; k < kPatternCount; ++k) p.classes[k] = rgb(classes.at(std::string(to_string(kAllPatterns[k]))));
    p.unclassified = rgb(classes.at("unclassified"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

RgbImage render_overlay(const PatternOverlay& overlay, std::uint32_t block, const Palette& palette) {
  if (block == 0) throw Error(ErrorCode::InvalidArgument, "block factor must be positive");
  // A map smaller than one tile still renders as a single black block.
  const std::uint32_t gw = std::max<std::uint32_t>(1, overlay.grid_width);
  const std::uint32_t gh = std::max<std::uint32_t>(1, overlay.grid_height);
  RgbImage img(gw * block, gh * block);
  for (std::uint32_t gy = 0; gy < overlay.grid_height; ++gy)
    for (std::uint32_t gx = 0; gx < overlay.grid_width; ++gx) {
      const Rgb c = palette.colour(overlay.at(gx, gy));
      for (std::uint32_t y = gy * block; y < (gy + 1) * block; ++y)
        for (std::uint32_t x = gx * block; x < (gx + 1) * block; ++x) {
          auto* px = img.at(x, y);
          px[0] = c.r;
          px[1] = c.g;
          px[2] = c.b;
        }
    }
  return img;
}

std::vector<std::uint8_t> render_overlay_png(const PatternOverlay& overlay, std::uint32_t block,
                                             const Palette& palette) {
  return encode_png(render_overlay(overlay, block, palette));
}

SlideFeatureVector feature_vector(std::span<const PredictionRecord> predictions) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions for feature vector");
  SlideFeatureVector f;
  f.slide_id = predictions.front().slide_id;
  f.patient_id = predictions.front().patient_id;
  std::array<std::size_t, kPatternCount> counts{};
  for (const auto& p : predictions) ++counts[static_cast<std::size_t>(argmax(p.probabilities))];
  const double total = static_cast<double>(predictions.size());
  for (std::size_t k = 0; k < kPatternCount; ++k) f.fractions[k] = static_cast<double>(counts[k]) / total;
  return f;
}

namespace {

const char* kFeatureColumns[] = {"lepidic", "acinar", "papillary", "micropapillary", "solid", "normal"};

}  // namespace

void write_feature_vectors(const std::filesystem::path& path, std::span<const SlideFeatureVector> features) {
  csv::Table t;
  t.header = {"slide_id", "patient_id"};
  for (const char* c : kFeatureColumns) t.header.emplace_back(c);
  for (const auto& f : features) {
    csv::Row row = {f.slide_id, f.patient_id};
    for (double v : f.fractions) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

std::vector<SlideFeatureVector> read_feature_vectors(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto slide = t.column("slide_id"), patient = t.column("patient_id");
  std::array<std::size_t, kPatternCount> cols{};
  for (std::size_t k = 0; k < kPatternCount; ++k) cols[k] = t.column(kFeatureColumns[k]);
  std::vector<SlideFeatureVector> out;
  for (const auto& row : t.rows) {
    SlideFeatureVector f;
    f.slide_id = row[slide];
    f.patient_id = row[patient];
    for (std::size_t k = 0; k < kPatternCount; ++k) f.fractions[k] = csv::to_double(row[cols[k]]);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace cellomaps
