#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cellomaps/nuclei.hpp"
#include "cellomaps/tiler.hpp"

namespace cellomaps {

/// Geometry is in map pixels at target_mpp; point budgets are per 256x256
/// tile and scale with tile area.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t tiles_per_class = 60;
  std::uint32_t tile_size = 256;
  std::size_t patients = 12;
  double source_mpp = 0.5;
  double target_mpp = 2.0;
  std::size_t min_points = 350;
  std::size_t max_points = 550;
  double gland_radius = 14.0;     // acinar ring radius
  double cluster_radius = 2.5;    // micropapillary cluster spread (sd)
  double wall_spacing = 40.0;     // lepidic/normal lattice cell size
  double lining_offset = 4.0;     // papillary lining distance from the core
  double noise_fraction = 0.05;

  void validate() const;
};

/// Nuclei of one class tile at map resolution, coordinates in [0, tile_size).
/// Deterministic in (seed, pattern, tile_index).
SlideNucleiSet generate_class_tile(PatternClass pattern, const SynthConfig& config, std::size_t tile_index);

struct SynthCorpus {
  std::vector<SlideNucleiSet> slides;  // one slide per patient, at source_mpp
  std::vector<SlideAnnotations> annotations;
  std::vector<ManifestEntry> truth;
};

/// Tiles are dealt round-robin to patients so every patient holds several
/// classes, then laid out on a per-patient grid in seeded random order.
SynthCorpus generate_corpus(const SynthConfig& config);

/// <dir>/<slide>.json, <dir>/annotations/<slide>.json and <dir>/truth.csv.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace cellomaps
