#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cellomaps/bitplane.hpp"
#include "cellomaps/cellomap.hpp"
#include "cellomaps/polygon.hpp"

namespace cellomaps {

enum class PatternClass : std::uint8_t {
  Lepidic = 0,
  Acinar = 1,
  Papillary = 2,
  Micropapillary = 3,
  Solid = 4,
  Normal = 5,
};

inline constexpr int kPatternCount = 6;
inline constexpr std::array<PatternClass, kPatternCount> kAllPatterns = {
    PatternClass::Lepidic, PatternClass::Acinar, PatternClass::Papillary,
    PatternClass::Micropapillary, PatternClass::Solid, PatternClass::Normal};

std::string_view to_string(PatternClass p) noexcept;
PatternClass pattern_from_string(std::string_view name);
inline constexpr int index_of(PatternClass p) noexcept { return static_cast<int>(p); }

struct RegionAnnotation {
  std::vector<Point2> polygon;
  PatternClass label = PatternClass::Normal;
};

struct SlideAnnotations {
  std::string slide_id;
  std::vector<RegionAnnotation> regions;
};

/// Checks vertex count, simplicity and that every vertex lies in [0,w]x[0,h].
void validate(const RegionAnnotation& region, std::uint32_t map_width, std::uint32_t map_height);

SlideAnnotations parse_annotations_json(std::string_view text);
SlideAnnotations read_annotations(const std::filesystem::path& path);
std::string serialize_annotations_json(const SlideAnnotations& annotations);

/// Square window of a CellOMap, with its own copy of the channel bits.
struct Tile {
  std::string slide_id;
  std::string patient_id;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t size = 0;
  std::vector<BitPlane> planes;

  std::size_t set_bits() const noexcept;
};

struct LabeledTile : Tile {
  PatternClass label = PatternClass::Normal;
};

inline constexpr std::array<std::uint32_t, 4> kSupportedTileSizes = {224, 256, 448, 1024};
inline constexpr double kDefaultMinOverlap = 0.95;
inline constexpr std::size_t kDefaultMinNuclei448 = 25;

/// Full windows only, origins (i*stride, j*stride), row-major.
std::vector<Tile> tile_map(const CellOMap& map, std::uint32_t size, std::uint32_t stride);

/// Fraction of the tile's area covered by regions of each pattern.
std::array<double, kPatternCount> label_coverage(const Tile& tile, std::span<const RegionAnnotation> regions);

/// Keeps tiles that are at least `min_overlap` one pattern and no more than
/// 1 - min_overlap any other; everything else is dropped.
std::vector<LabeledTile> label_tiles(std::span<const Tile> tiles, std::span<const RegionAnnotation> regions,
                                     double min_overlap = kDefaultMinOverlap);

template <typename T>
std::vector<T> filter_sparse_tiles(std::span<const T> tiles, std::size_t min_nuclei) {
  std::vector<T> kept;
  for (const auto& t : tiles)
    if (t.set_bits() >= min_nuclei) kept.push_back(t);
  return kept;
}

/// The 448-pixel default scaled by area to another tile size.
std::size_t default_min_nuclei(std::uint32_t tile_size);

/// One row of the tile manifest CSV.
struct ManifestEntry {
  std::string slide_id;
  std::string patient_id;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t size = 0;
  PatternClass label = PatternClass::Normal;

  /// "slide_id:x:y", the identifier used by split plans.
  std::string tile_id() const;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

ManifestEntry manifest_entry(const LabeledTile& tile);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::string manifest_csv(std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> parse_manifest_csv(std::string_view text);

/// Cut one tile at (x, y) from the map.
Tile extract_tile(const CellOMap& map, std::uint32_t x, std::uint32_t y, std::uint32_t size);

}  // namespace cellomaps
