#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cellomaps/tiler.hpp"

namespace cellomaps {

struct PredictionRecord {
  std::string slide_id;
  std::string patient_id;  // not part of the predictions CSV
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::array<double, kPatternCount> probabilities{};
  int predicted = 0;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// First maximum wins, so ties resolve to the lowest class index.
int argmax(std::span<const double> values);

PredictionRecord make_prediction(std::string slide_id, std::uint32_t x, std::uint32_t y,
                                 const std::array<double, kPatternCount>& probabilities);

/// CSV columns slide_id, x, y, p0..p5, predicted.
std::string predictions_csv(std::span<const PredictionRecord> predictions);
std::vector<PredictionRecord> parse_predictions_csv(std::string_view text);
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> predictions);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace cellomaps
