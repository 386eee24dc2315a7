#include "cellomaps/dataset.hpp"

#include <unordered_set>

#include "cellomaps/csv.hpp"
#include "cellomaps/error.hpp"

namespace cellomaps {

void write_map_index(const std::filesystem::path& dir, std::span<const MapIndexEntry> entries) {
  csv::Table table;
  table.header = {"slide_id", "patient_id", "file"};
  for (const auto& e : entries) table.rows.push_back({e.slide_id, e.patient_id, e.file});
  csv::write(dir / kMapIndexName, table);
}

std::vector<MapIndexEntry> read_map_index(const std::filesystem::path& dir) {
  const auto table = csv::read(dir / kMapIndexName);
  const auto cs = table.column("slide_id"), cp = table.column("patient_id"), cf = table.column("file");
  std::vector<MapIndexEntry> out;
  for (const auto& row : table.rows) out.push_back({row[cs], row[cp], row[cf]});
  return out;
}

CellOMap load_indexed_map(const std::filesystem::path& dir, const MapIndexEntry& entry) {
  CellOMap map = read_clom(dir / entry.file);
  map.slide_id = entry.slide_id;
  map.patient_id = entry.patient_id;
  return map;
}

std::vector<LabeledTile> tile_and_label(const CellOMap& map, std::span<const RegionAnnotation> regions,
                                        std::uint32_t size, std::uint32_t stride, double min_overlap,
                                        std::size_t min_nuclei) {
  const auto tiles = tile_map(map, size, stride);
  const auto labeled = label_tiles(tiles, regions, min_overlap);
  return filter_sparse_tiles<LabeledTile>(labeled, min_nuclei);
}

std::vector<LabeledTile> load_manifest_tiles(const std::filesystem::path& maps_dir,
                                             std::span<const ManifestEntry> manifest) {
  std::map<std::string, MapIndexEntry> index;
  for (auto& e : read_map_index(maps_dir)) index.emplace(e.slide_id, e);
  std::map<std::string, CellOMap> cache;
  std::vector<LabeledTile> out;
  out.reserve(manifest.size());
  for (const auto& m : manifest) {
    auto it = cache.find(m.slide_id);
    if (it == cache.end()) {
      const auto found = index.find(m.slide_id);
      if (found == index.end()) throw Error(ErrorCode::MalformedInput, "slide " + m.slide_id + " is not in the map index");
      it = cache.emplace(m.slide_id, load_indexed_map(maps_dir, found->second)).first;
    }
    LabeledTile t;
    static_cast<Tile&>(t) = extract_tile(it->second, m.x, m.y, m.size);
    t.patient_id = m.patient_id;
    t.label = m.label;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<ManifestEntry> select_tiles(std::span<const ManifestEntry> manifest, std::span<const std::string> ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::vector<ManifestEntry> out;
  for (const auto& m : manifest)
    if (wanted.count(m.tile_id())) out.push_back(m);
  return out;
}

}  // namespace cellomaps
