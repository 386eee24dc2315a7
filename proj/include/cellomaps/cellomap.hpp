#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cellomaps/bitplane.hpp"
#include "cellomaps/nuclei.hpp"
#include "cellomaps/png.hpp"

namespace cellomaps {

/// Ordered, duplicate-free list of 1..5 cell classes; one map channel each.
class ChannelSpec {
 public:
  ChannelSpec();  // the canonical three: neoplastic, non-neoplastic, connective
  ChannelSpec(std::initializer_list<CellClass> classes);
  explicit ChannelSpec(std::vector<CellClass> classes);

  /// Comma-separated class names, e.g. "NeoplasticEpithelial,Connective".
  static ChannelSpec parse(const std::string& text);
  std::string to_string() const;

  std::size_t size() const noexcept { return classes_.size(); }
  CellClass operator[](std::size_t i) const { return classes_[i]; }
  const std::vector<CellClass>& classes() const noexcept { return classes_; }
  /// Channel index of c, or -1 when c is not mapped.
  int index_of(CellClass c) const noexcept;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;

 private:
  std::vector<CellClass> classes_;
};

struct CellOMap {
  std::string slide_id;
  std::string patient_id;
  double mpp = 2.0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  ChannelSpec channels;
  std::vector<BitPlane> planes;

  friend bool operator==(const CellOMap&, const CellOMap&) = default;
};

CellOMap make_empty_map(std::uint32_t width, std::uint32_t height, const ChannelSpec& channels,
                        double mpp = 2.0);

/// One set bit per occupied (class, pixel); classes outside `channels` are dropped.
CellOMap build_cellomap(const SlideNucleiSet& scaled, const ChannelSpec& channels);

// CLOM container.
inline constexpr std::size_t kClomFixedHeaderBytes = 20;
inline constexpr std::uint8_t kClomVersion = 1;

std::size_t clom_header_bytes(std::size_t channel_count) noexcept;
std::size_t clom_payload_bytes(std::uint32_t width, std::uint32_t height, std::size_t channel_count) noexcept;

std::vector<std::uint8_t> encode(const CellOMap& map);
/// The container has no slide or patient id; those come back empty.
CellOMap decode(std::span<const std::uint8_t> bytes);

void write_clom(const CellOMap& map, const std::filesystem::path& path);
CellOMap read_clom(const std::filesystem::path& path);

/// Fixed display colours: neoplastic green, connective red, non-neoplastic blue.
RgbImage render_rgb(const CellOMap& map, std::uint32_t dot_radius);
std::vector<std::uint8_t> render_png(const CellOMap& map, std::uint32_t dot_radius);

struct EntropyReport {
  double bits_per_pixel = 0.0;
  std::vector<std::uint64_t> symbol_histogram;
};

/// Per-pixel composite symbol sum_c bit_c << c over the window.
std::vector<std::uint16_t> composite_symbols(const CellOMap& map, std::uint32_t x0, std::uint32_t y0,
                                             std::uint32_t width, std::uint32_t height);
std::vector<std::uint16_t> composite_symbols(std::span<const BitPlane> planes);
/// 8-bit BT.601 luma of an RGB raster.
std::vector<std::uint16_t> luminance_symbols(const RgbImage& image);

EntropyReport shannon_entropy(std::span<const std::uint16_t> symbols, std::uint32_t alphabet_size);

double compression_ratio(const CellOMap& map, double reference_bits_per_pixel,
                         std::uint64_t reference_pixel_count);

}  // namespace cellomaps
