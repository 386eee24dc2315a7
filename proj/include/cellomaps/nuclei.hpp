#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cellomaps {

/// Nucleus classes emitted by the detector. The integer values are the
/// on-disk class codes used by the CLOM container.
enum class CellClass : std::uint8_t {
  NeoplasticEpithelial = 0,
  NonNeoplasticEpithelial = 1,
  Connective = 2,
  Inflammatory = 3,
  Necrotic = 4,
};

inline constexpr int kCellClassCount = 5;
inline constexpr std::array<CellClass, kCellClassCount> kAllCellClasses = {
    CellClass::NeoplasticEpithelial, CellClass::NonNeoplasticEpithelial, CellClass::Connective,
    CellClass::Inflammatory, CellClass::Necrotic};

std::string_view to_string(CellClass c) noexcept;
/// Throws Error(UnknownClass) for names outside the closed vocabulary.
CellClass cell_class_from_string(std::string_view name);
std::optional<CellClass> cell_class_from_code(std::uint8_t code) noexcept;

struct NucleusRecord {
  double x = 0.0;
  double y = 0.0;
  CellClass cell_class = CellClass::NeoplasticEpithelial;
  std::optional<double> confidence;

  friend bool operator==(const NucleusRecord&, const NucleusRecord&) = default;
};

struct SlideNucleiSet {
  std::string slide_id;
  std::string patient_id;
  double source_mpp = 0.5;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<NucleusRecord> records;

  friend bool operator==(const SlideNucleiSet&, const SlideNucleiSet&) = default;
};

/// Throws Error on any violated invariant (ids, mpp, record bounds).
void validate(const SlideNucleiSet& set);

struct RemapRule {
  CellClass from_class;
  CellClass to_class;
};

/// The single cohort-specific rule: necrosis reclassified as neoplastic.
inline constexpr RemapRule kNecrosisAsNeoplastic{CellClass::Necrotic,
                                                 CellClass::NeoplasticEpithelial};

SlideNucleiSet parse_nuclei_json(std::string_view text);
SlideNucleiSet parse_nuclei_file(const std::filesystem::path& path);

/// Canonical JSON form (class names, no class_codes table).
std::string serialize_nuclei_json(const SlideNucleiSet& set);
void write_nuclei_file(const SlideNucleiSet& set, const std::filesystem::path& path);

SlideNucleiSet apply_remap(const SlideNucleiSet& set, std::span<const RemapRule> rules);

/// Points map by floor(c * source/target); dimensions by ceil of the same ratio.
SlideNucleiSet scale_coordinates(const SlideNucleiSet& set, double target_mpp);

}  // namespace cellomaps
