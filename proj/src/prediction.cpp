#include "cellomaps/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cellomaps/csv.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/format.hpp"

namespace cellomaps {

int argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "argmax of empty vector");
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

PredictionRecord make_prediction(std::string slide_id, std::uint32_t x, std::uint32_t y,
                                 const std::array<double, kPatternCount>& probabilities) {
  PredictionRecord r;
  r.slide_id = std::move(slide_id);
  r.x = x;
  r.y = y;
  r.probabilities = probabilities;
  r.predicted = argmax(probabilities);
  return r;
}

std::string predictions_csv(std::span<const PredictionRecord> predictions) {
  csv::Table t;
  t.header = {"slide_id", "x", "y", "p0", "p1", "p2", "p3", "p4", "p5", "predicted"};
  for (const auto& p : predictions) {
    csv::Row row = {p.slide_id, std::to_string(p.x), std::to_string(p.y)};
    for (double v : p.probabilities) row.push_back(format_double(v));
    row.push_back(std::to_string(p.predicted));
    t.rows.push_back(std::move(row));
  }
  return csv::to_string(t);
}

std::vector<PredictionRecord> parse_predictions_csv(std::string_view text) {
  const auto t = csv::parse(text);
  const auto slide = t.column("slide_id"), x = t.column("x"), y = t.column("y"), pred = t.column("predicted");
  std::array<std::size_t, kPatternCount> p{};
  for (int k = 0; k < kPatternCount; ++k) p[static_cast<std::size_t>(k)] = t.column("p" + std::to_string(k));
  std::vector<PredictionRecord> out;
  for (const auto& row : t.rows) {
    PredictionRecord r;
    r.slide_id = row[slide];
    const auto xv = csv::to_int(row[x]), yv = csv::to_int(row[y]);
    if (xv < 0 || yv < 0) throw Error(ErrorCode::MalformedInput, "negative tile origin in predictions");
    r.x = static_cast<std::uint32_t>(xv);
    r.y = static_cast<std::uint32_t>(yv);
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      r.probabilities[k] = csv::to_double(row[p[k]]);
      if (!(r.probabilities[k] >= 0.0)) throw Error(ErrorCode::MalformedInput, "negative probability");
      sum += r.probabilities[k];
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::MalformedInput, "probabilities do not sum to 1");
    const auto pv = csv::to_int(row[pred]);
    if (pv < 0 || pv >= kPatternCount) throw Error(ErrorCode::MalformedInput, "predicted class out of range");
    r.predicted = static_cast<int>(pv);
    out.push_back(std::move(r));
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << predictions_csv(predictions);
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_predictions_csv(text);
}

}  // namespace cellomaps
