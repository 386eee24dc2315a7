#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cellomaps/cellomap.hpp"
#include "cellomaps/tiler.hpp"

namespace cellomaps {

/// maps.csv sidecar: CLOM files carry no ids, so the index maps each slide to
/// its patient and file (relative to the index directory).
struct MapIndexEntry {
  std::string slide_id;
  std::string patient_id;
  std::string file;
  friend bool operator==(const MapIndexEntry&, const MapIndexEntry&) = default;
};

inline constexpr const char* kMapIndexName = "maps.csv";

void write_map_index(const std::filesystem::path& dir, std::span<const MapIndexEntry> entries);
std::vector<MapIndexEntry> read_map_index(const std::filesystem::path& dir);

/// Loads one map from an index directory and restores its ids.
CellOMap load_indexed_map(const std::filesystem::path& dir, const MapIndexEntry& entry);

/// Tiles a map, labels them against the annotations and drops sparse tiles.
std::vector<LabeledTile> tile_and_label(const CellOMap& map, std::span<const RegionAnnotation> regions,
                                        std::uint32_t size, std::uint32_t stride, double min_overlap,
                                        std::size_t min_nuclei);

/// Tiles named by a manifest, cut from the indexed maps, in manifest order.
std::vector<LabeledTile> load_manifest_tiles(const std::filesystem::path& maps_dir,
                                             std::span<const ManifestEntry> manifest);

/// Manifest rows whose tile ids appear in `ids`, in manifest order.
std::vector<ManifestEntry> select_tiles(std::span<const ManifestEntry> manifest, std::span<const std::string> ids);

}  // namespace cellomaps
