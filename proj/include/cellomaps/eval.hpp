#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cellomaps/prediction.hpp"
#include "cellomaps/tiler.hpp"

namespace cellomaps {

enum class SplitMode { PatientLevel, TileLevel };

std::string_view to_string(SplitMode mode) noexcept;
SplitMode split_mode_from_string(std::string_view name);

struct SplitPlan {
  SplitMode mode = SplitMode::PatientLevel;
  std::uint64_t seed = 0;
  std::vector<std::string> test_patients;  // patient mode only, sorted
  std::vector<std::string> train;          // tile ids, manifest order
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::size_t attempts = 0;  // stratification draws used

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SplitOptions {
  SplitMode mode = SplitMode::PatientLevel;
  std::size_t test_patient_count = 10;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_attempts = 1000;
};

/// Patient mode draws test patients until every class in the manifest has a
/// test tile (bounded by max_attempts), then splits the remaining tiles into
/// train/val. Tile mode shuffles all tiles, with a test share equal to
/// test_patient_count / patient count.
SplitPlan make_split(std::span<const ManifestEntry> manifest, const SplitOptions& options);

nlohmann::json split_plan_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::json& doc);
void write_split_plan(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan read_split_plan(const std::filesystem::path& path);

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kPatternCount> per_class_f1{};
  double macro_auc_roc = 0.0;  // NaN when no class has both positives and negatives
  std::array<double, kPatternCount> per_class_auc{};  // NaN where undefined
  std::array<std::array<std::uint64_t, kPatternCount>, kPatternCount> confusion{};  // [truth][predicted]
  std::array<std::uint64_t, kPatternCount> support{};
  std::vector<PatternClass> f1_skipped;   // no support
  std::vector<PatternClass> auc_skipped;  // no positives or no negatives
};

MetricsReport compute_metrics(std::span<const PredictionRecord> predictions, std::span<const PatternClass> truths);

/// Mann-Whitney U with midranks, normalized to [0, 1].
double rank_auc(std::span<const double> scores, std::span<const bool> positive);

nlohmann::json metrics_json(const MetricsReport& report);
std::string metrics_table(const MetricsReport& report);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

MeanStd mean_std(std::span<const double> values);

struct CrossValidationSummary {
  std::vector<MetricsReport> repeats;
  MeanStd accuracy;
  MeanStd macro_f1;
  MeanStd macro_auc_roc;
};

/// Runs `run(seed_r)` for r in [0, repeats) with seeds derived from base_seed.
CrossValidationSummary cross_validate(std::size_t repeats, std::uint64_t base_seed,
                                      const std::function<MetricsReport(std::uint64_t)>& run);

}  // namespace cellomaps
