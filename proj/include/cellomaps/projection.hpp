#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellomaps/png.hpp"
#include "cellomaps/prediction.hpp"

namespace cellomaps {

inline constexpr int kUnclassified = -1;

struct PatternOverlay {
  std::uint32_t map_width = 0;
  std::uint32_t map_height = 0;
  std::uint32_t tile_size = 0;
  std::uint32_t grid_width = 0;
  std::uint32_t grid_height = 0;
  std::vector<int> cells;  // row-major class index or kUnclassified

  int at(std::uint32_t gx, std::uint32_t gy) const { return cells[std::size_t{gy} * grid_width + gx]; }
  friend bool operator==(const PatternOverlay&, const PatternOverlay&) = default;
};

/// Grid cell (x / tile, y / tile) takes the tile's argmax class.
PatternOverlay build_overlay(std::span<const PredictionRecord> predictions, std::uint32_t map_width,
                             std::uint32_t map_height, std::uint32_t tile_size);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Palette {
  std::array<Rgb, kPatternCount> classes;
  Rgb unclassified;

  Rgb colour(int cell) const { return cell < 0 ? unclassified : classes[static_cast<std::size_t>(cell)]; }
  friend bool operator==(const Palette&, const Palette&) = default;
};

/// Lepidic yellow, Acinar orange, Papillary cyan, Micropapillary magenta,
/// Solid dark red, Normal green, unclassified black.
const Palette& default_palette();

nlohmann::json legend_json(const Palette& palette, std::uint32_t block);
Palette palette_from_json(const nlohmann::json& legend);

RgbImage render_overlay(const PatternOverlay& overlay, std::uint32_t block = 8,
                        const Palette& palette = default_palette());
std::vector<std::uint8_t> render_overlay_png(const PatternOverlay& overlay, std::uint32_t block = 8,
                                             const Palette& palette = default_palette());

struct SlideFeatureVector {
  std::string slide_id;
  std::string patient_id;
  std::array<double, kPatternCount> fractions{};  // Lepidic..Normal
};

SlideFeatureVector feature_vector(std::span<const PredictionRecord> predictions);

void write_feature_vectors(const std::filesystem::path& path, std::span<const SlideFeatureVector> features);
std::vector<SlideFeatureVector> read_feature_vectors(const std::filesystem::path& path);

}  // namespace cellomaps
