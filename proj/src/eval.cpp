#include "cellomaps/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "cellomaps/error.hpp"
#include "cellomaps/rng.hpp"

namespace cellomaps {

std::string_view to_string(SplitMode mode) noexcept {
  return mode == SplitMode::PatientLevel ? "patient" : "tile";
}

SplitMode split_mode_from_string(std::string_view name) {
  if (name == "patient" || name == "patient_level") return SplitMode::PatientLevel;
  if (name == "tile" || name == "tile_level") return SplitMode::TileLevel;
  throw Error(ErrorCode::InvalidArgument, "unknown split mode '" + std::string(name) + "'");
}

namespace {

std::size_t rounded_share(std::size_t n, double fraction) {
  return std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction)));
}

}  // namespace

SplitPlan make_split(std::span<const ManifestEntry> manifest, const SplitOptions& options) {
  if (manifest.empty()) throw Error(ErrorCode::EmptyDataset, "manifest is empty");
  if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in [0, 1)");
  }
  if (options.test_patient_count == 0) throw Error(ErrorCode::InvalidArgument, "need at least one test patient");

  std::set<std::string> patient_set;
  std::set<PatternClass> classes;
  for (const auto& e : manifest) {
    patient_set.insert(e.patient_id);
    classes.insert(e.label);
  }
  const std::vector<std::string> patients(patient_set.begin(), patient_set.end());

  SplitPlan plan;
  plan.mode = options.mode;
  plan.seed = options.seed;

  if (options.mode == SplitMode::TileLevel) {
    std::vector<std::size_t> idx(manifest.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(options.seed, 0x711E));
    rng.shuffle(std::span<std::size_t>(idx));
    const double test_share = std::min(1.0, static_cast<double>(options.test_patient_count) /
                                                static_cast<double>(patients.size()));
    const std::size_t n_test = rounded_share(idx.size(), test_share);
    const std::size_t n_val = rounded_share(idx.size() - n_test, options.val_fraction);
    std::vector<int> side(manifest.size(), 0);  // 0 train, 1 val, 2 test
    for (std::size_t i = 0; i < idx.size(); ++i) side[idx[i]] = i < n_test ? 2 : (i < n_test + n_val ? 1 : 0);
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      auto& dst = side[i] == 2 ? plan.test : (side[i] == 1 ? plan.val : plan.train);
      dst.push_back(manifest[i].tile_id());
    }
    plan.attempts = 1;
    return plan;
  }

  if (patients.size() < options.test_patient_count + 1) {
    throw Error(ErrorCode::InsufficientPatients, std::to_string(patients.size()) + " patients, need at least " +
                                                     std::to_string(options.test_patient_count + 1));
  }
  std::set<std::string> test;
  bool stratified = false;
  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, options.max_attempts); ++attempt) {
    std::vector<std::string> shuffled = patients;
    Rng rng(derive_seed(options.seed, 0x7E57, attempt));
    rng.shuffle(std::span<std::string>(shuffled));
    test = std::set<std::string>(shuffled.begin(),
                                 shuffled.begin() + static_cast<std::ptrdiff_t>(options.test_patient_count));
    std::set<PatternClass> covered;
    for (const auto& e : manifest)
      if (test.count(e.patient_id)) covered.insert(e.label);
    plan.attempts = attempt + 1;
    if (covered == classes) {
      stratified = true;
      break;
    }
  }
  if (!stratified) {
    throw Error(ErrorCode::StratificationFailed,
                "no draw of " + std::to_string(options.test_patient_count) + " test patients covers every class after " +
                    std::to_string(plan.attempts) + " attempts");
  }
  plan.test_patients.assign(test.begin(), test.end());

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (test.count(manifest[i].patient_id)) {
      plan.test.push_back(manifest[i].tile_id());
    } else {
      rest.push_back(i);
    }
  }
  std::vector<std::size_t> shuffled = rest;
  Rng rng(derive_seed(options.seed, 0x7A1));
  rng.shuffle(std::span<std::size_t>(shuffled));
  const std::size_t n_val = rounded_share(shuffled.size(), options.val_fraction);
  std::set<std::size_t> val(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  for (auto i : rest) (val.count(i) ? plan.val : plan.train).push_back(manifest[i].tile_id());
  return plan;
}

nlohmann::json split_plan_json(const SplitPlan& plan) {
  return {{"mode", std::string(to_string(plan.mode))},
          {"seed", plan.seed},
          {"attempts", plan.attempts},
          {"test_patients", plan.test_patients},
          {"train", plan.train},
          {"val", plan.val},
          {"test", plan.test}};
}

SplitPlan split_plan_from_json(const nlohmann::json& doc) {
  try {
    SplitPlan plan;
    plan.mode = split_mode_from_string(doc.at("mode").get<std::string>());
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.attempts = doc.value("attempts", std::size_t{0});
    plan.test_patients = doc.at("test_patients").get<std::vector<std::string>>();
    plan.train = doc.at("train").get<std::vector<std::string>>();
    plan.val = doc.at("val").get<std::vector<std::string>>();
    plan.test = doc.at("test").get<std::vector<std::string>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

void write_split_plan(const std::filesystem::path& path, const SplitPlan& plan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << split_plan_json(plan).dump(2) << '\n';
}

SplitPlan read_split_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return split_plan_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

double rank_auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

MetricsReport compute_metrics(std::span<const PredictionRecord> predictions, std::span<const PatternClass> truths) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(truths.size()) + " labels");
  }
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");

  MetricsReport r;
  const std::size_t n = predictions.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(index_of(truths[i]));
    const auto p = static_cast<std::size_t>(predictions[i].predicted);
    if (p >= kPatternCount) throw Error(ErrorCode::InvalidArgument, "predicted class out of range");
    ++r.confusion[t][p];
    ++r.support[t];
  }
  std::uint64_t correct = 0;
  for (std::size_t k = 0; k < kPatternCount; ++k) correct += r.confusion[k][k];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  double f1_sum = 0.0;
  std::size_t f1_count = 0;
  double auc_sum = 0.0;
  std::size_t auc_count = 0;
  std::vector<double> scores(n);
  const std::unique_ptr<bool[]> positive(new bool[n]);
  for (std::size_t k = 0; k < kPatternCount; ++k) {
    std::uint64_t tp = r.confusion[k][k], fp = 0, fn = 0;
    for (std::size_t j = 0; j < kPatternCount; ++j) {
      if (j == k) continue;
      fp += r.confusion[j][k];
      fn += r.confusion[k][j];
    }
    const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.per_class_f1[k] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    if (r.support[k] > 0) {
      f1_sum += r.per_class_f1[k];
      ++f1_count;
    } else {
      r.f1_skipped.push_back(kAllPatterns[k]);
    }

    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = predictions[i].probabilities[k];
      positive[i] = static_cast<std::size_t>(index_of(truths[i])) == k;
    }
    r.per_class_auc[k] = rank_auc(scores, std::span<const bool>(positive.get(), n));
    if (std::isnan(r.per_class_auc[k])) {
      r.auc_skipped.push_back(kAllPatterns[k]);
    } else {
      auc_sum += r.per_class_auc[k];
      ++auc_count;
    }
  }
  r.macro_f1 = f1_sum / static_cast<double>(f1_count);
  r.macro_auc_roc = auc_count ? auc_sum / static_cast<double>(auc_count) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

nlohmann::json metrics_json(const MetricsReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["macro_f1"] = report.macro_f1;
  j["macro_auc_roc"] = number_or_null(report.macro_auc_roc);
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t k = 0; k < kPatternCount; ++k) {
    per_class[std::string(to_string(kAllPatterns[k]))] = {{"f1", report.per_class_f1[k]},
                                                           {"auc_roc", number_or_null(report.per_class_auc[k])},
                                                           {"support", report.support[k]}};
  }
  j["per_class"] = per_class;
  j["confusion_matrix"] = report.confusion;
  auto names = [](const std::vector<PatternClass>& v) {
    std::vector<std::string> out;
    for (auto p : v) out.emplace_back(to_string(p));
    return out;
  };
  j["f1_skipped"] = names(report.f1_skipped);
  j["auc_skipped"] = names(report.auc_skipped);
  return j;
}

std::string metrics_table(const MetricsReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "accuracy  " << report.accuracy << "\nmacro_f1  " << report.macro_f1 << "\nmacro_auc " << report.macro_auc_roc
      << "\n\n";
  out << std::left << std::setw(16) << "class" << std::right << std::setw(9) << "support" << std::setw(9) << "f1"
      << std::setw(9) << "auc" << "\n";
  for (std::size_t k = 0; k < kPatternCount; ++k) {
    out << std::left << std::setw(16) << to_string(kAllPatterns[k]) << std::right << std::setw(9) << report.support[k]
        << std::setw(9) << report.per_class_f1[k] << std::setw(9) << report.per_class_auc[k] << "\n";
  }
  out << "\nconfusion (rows truth, columns predicted)\n";
  for (const auto& row : report.confusion) {
    for (auto c : row) out << std::setw(6) << c;
    out << "\n";
  }
  return out.str();
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

CrossValidationSummary cross_validate(std::size_t repeats, std::uint64_t base_seed,
                                      const std::function<MetricsReport(std::uint64_t)>& run) {
  CrossValidationSummary s;
  std::vector<double> acc, f1, auc;
  for (std::size_t r = 0; r < repeats; ++r) {
    s.repeats.push_back(run(derive_seed(base_seed, 0xC0FFEE, r)));
    acc.push_back(s.repeats.back().accuracy);
    f1.push_back(s.repeats.back().macro_f1);
    auc.push_back(s.repeats.back().macro_auc_roc);
  }
  s.accuracy = mean_std(acc);
  s.macro_f1 = mean_std(f1);
  s.macro_auc_roc = mean_std(auc);
  return s;
}

}  // namespace cellomaps
