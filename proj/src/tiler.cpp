#include "cellomaps/tiler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cellomaps/csv.hpp"
#include "cellomaps/error.hpp"

namespace cellomaps {

using nlohmann::json;

std::string_view to_string(PatternClass p) noexcept {
  switch (p) {
    case PatternClass::Lepidic: return "Lepidic";
    case PatternClass::Acinar: return "Acinar";
    case PatternClass::Papillary: return "Papillary";
    case PatternClass::Micropapillary: return "Micropapillary";
    case PatternClass::Solid: return "Solid";
    case PatternClass::Normal: return "Normal";
  }
  return "?";
}

PatternClass pattern_from_string(std::string_view name) {
  for (auto p : kAllPatterns)
    if (to_string(p) == name) return p;
  throw Error(ErrorCode::UnknownClass, "unknown pattern class '" + std::string(name) + "'");
}

void validate(const RegionAnnotation& region, std::uint32_t map_width, std::uint32_t map_height) {
  if (region.polygon.size() < 3) throw Error(ErrorCode::MalformedInput, "polygon needs at least 3 vertices");
  for (const auto& v : region.polygon) {
    if (!(v.x >= 0.0 && v.y >= 0.0 && v.x <= map_width && v.y <= map_height)) {
      throw Error(ErrorCode::OutOfBounds, "polygon vertex outside map");
    }
  }
  if (!is_simple(region.polygon)) throw Error(ErrorCode::MalformedInput, "polygon is not simple");
}

SlideAnnotations parse_annotations_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  SlideAnnotations out;
  try {
    out.slide_id = doc.at("slide_id").get<std::string>();
    for (const auto& r : doc.at("regions")) {
      RegionAnnotation region;
      region.label = pattern_from_string(r.at("label").get<std::string>());
      for (const auto& v : r.at("polygon")) {
        if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::MalformedInput, "vertex must be [x, y]");
        region.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      if (region.polygon.size() < 3) throw Error(ErrorCode::MalformedInput, "polygon needs at least 3 vertices");
      if (!is_simple(region.polygon)) throw Error(ErrorCode::MalformedInput, "polygon is not simple");
      out.regions.push_back(std::move(region));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  return out;
}

SlideAnnotations read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_annotations_json(buf.str());
}

std::string serialize_annotations_json(const SlideAnnotations& annotations) {
  json doc;
  doc["slide_id"] = annotations.slide_id;
  json regions = json::array();
  for (const auto& r : annotations.regions) {
    json poly = json::array();
    for (const auto& v : r.polygon) poly.push_back({v.x, v.y});
    regions.push_back({{"label", std::string(to_string(r.label))}, {"polygon", std::move(poly)}});
  }
  doc["regions"] = std::move(regions);
  return doc.dump();
}

std::size_t Tile::set_bits() const noexcept {
  std::size_t n = 0;
  for (const auto& p : planes) n += p.popcount();
  return n;
}

Tile extract_tile(const CellOMap& map, std::uint32_t x, std::uint32_t y, std::uint32_t size) {
  Tile t;
  t.slide_id = map.slide_id;
  t.patient_id = map.patient_id;
  t.x = x;
  t.y = y;
  t.size = size;
  t.planes.reserve(map.planes.size());
  for (const auto& p : map.planes) t.planes.push_back(p.crop(x, y, size, size));
  return t;
}

std::vector<Tile> tile_map(const CellOMap& map, std::uint32_t size, std::uint32_t stride) {
  if (size == 0 || stride == 0) throw Error(ErrorCode::InvalidArgument, "tile size and stride must be positive");
  if (size > std::min(map.width, map.height)) {
    throw Error(ErrorCode::TileTooLarge, "tile size " + std::to_string(size) + " exceeds map " +
                                             std::to_string(map.width) + "x" + std::to_string(map.height));
  }
  std::vector<Tile> tiles;
  for (std::uint64_t y = 0; y + size <= map.height; y += stride)
    for (std::uint64_t x = 0; x + size <= map.width; x += stride)
      tiles.push_back(extract_tile(map, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), size));
  return tiles;
}

std::array<double, kPatternCount> label_coverage(const Tile& tile, std::span<const RegionAnnotation> regions) {
  std::array<double, kPatternCount> cover{};
  const double x0 = tile.x, y0 = tile.y, x1 = x0 + tile.size, y1 = y0 + tile.size;
  const double area = static_cast<double>(tile.size) * tile.size;
  for (const auto& r : regions) {
    cover[static_cast<std::size_t>(index_of(r.label))] += overlap_area(r.polygon, x0, y0, x1, y1) / area;
  }
  for (auto& c : cover) c = std::min(c, 1.0);
  return cover;
}

std::vector<LabeledTile> label_tiles(std::span<const Tile> tiles, std::span<const RegionAnnotation> regions,
                                     double min_overlap) {
  if (!(min_overlap > 0.5 && min_overlap <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "min_overlap must lie in (0.5, 1]");
  }
  // Areas from polygon clipping carry rounding noise; compare with a little slack.
  constexpr double kSlack = 1e-9;
  std::vector<LabeledTile> out;
  for (const auto& tile : tiles) {
    const auto cover = label_coverage(tile, regions);
    const auto best = static_cast<std::size_t>(std::max_element(cover.begin(), cover.end()) - cover.begin());
    if (cover[best] + kSlack < min_overlap) continue;
    bool pure = true;
    for (std::size_t k = 0; k < cover.size(); ++k)
      if (k != best && cover[k] > (1.0 - min_overlap) + kSlack) pure = false;
    if (!pure) continue;
    LabeledTile lt;
    static_cast<Tile&>(lt) = tile;
    lt.label = kAllPatterns[best];
    out.push_back(std::move(lt));
  }
  return out;
}

std::size_t default_min_nuclei(std::uint32_t tile_size) {
  const double scale = static_cast<double>(tile_size) * tile_size / (448.0 * 448.0);
  return static_cast<std::size_t>(std::lround(kDefaultMinNuclei448 * scale));
}

std::string ManifestEntry::tile_id() const {
  return slide_id + ":" + std::to_string(x) + ":" + std::to_string(y);
}

ManifestEntry manifest_entry(const LabeledTile& tile) {
  return {tile.slide_id, tile.patient_id, tile.x, tile.y, tile.size, tile.label};
}

std::string manifest_csv(std::span<const ManifestEntry> entries) {
  csv::Table t;
  t.header = {"slide_id", "patient_id", "x", "y", "size", "label"};
  for (const auto& e : entries) {
    t.rows.push_back({e.slide_id, e.patient_id, std::to_string(e.x), std::to_string(e.y), std::to_string(e.size),
                      std::string(to_string(e.label))});
  }
  return csv::to_string(t);
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << manifest_csv(entries);
}

namespace {

std::vector<ManifestEntry> manifest_from_table(const csv::Table& t) {
  const auto slide = t.column("slide_id"), patient = t.column("patient_id"), x = t.column("x"),
             y = t.column("y"), size = t.column("size"), label = t.column("label");
  std::vector<ManifestEntry> out;
  for (const auto& r : t.rows) {
    ManifestEntry e;
    e.slide_id = r[slide];
    e.patient_id = r[patient];
    const auto xv = csv::to_int(r[x]), yv = csv::to_int(r[y]), sv = csv::to_int(r[size]);
    if (xv < 0 || yv < 0 || sv <= 0) throw Error(ErrorCode::MalformedInput, "negative tile geometry in manifest");
    e.x = static_cast<std::uint32_t>(xv);
    e.y = static_cast<std::uint32_t>(yv);
    e.size = static_cast<std::uint32_t>(sv);
    e.label = pattern_from_string(r[label]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest_csv(std::string_view text) { return manifest_from_table(csv::parse(text)); }

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  return manifest_from_table(csv::read(path));
}

}  // namespace cellomaps
