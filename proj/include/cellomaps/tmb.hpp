#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cellomaps/params.hpp"
#include "cellomaps/prediction.hpp"
#include "cellomaps/projection.hpp"

namespace cellomaps {

enum class TMBLabel : std::uint8_t { Low = 0, High = 1 };

inline constexpr double kHighTmbMutationsPerMb = 10.0;

/// High iff at least 10 mutations per megabase.
TMBLabel tmb_label(double mutations_per_mb) noexcept;
std::string_view to_string(TMBLabel label) noexcept;
TMBLabel tmb_label_from_string(std::string_view name);

struct TmbRecord {
  std::string patient_id;
  TMBLabel label = TMBLabel::Low;
  std::optional<double> mutations_per_mb;
};

/// CSV with patient_id and either mut_per_mb or label (High/Low).
std::vector<TmbRecord> read_tmb_labels(const std::filesystem::path& path);

// ---------------------------------------------------------------- tile graph

using PatternFeatures = std::array<double, kPatternCount>;

struct GridNode {
  std::int64_t gx = 0;
  std::int64_t gy = 0;
  PatternFeatures features{};
};

/// 4-connected grid graph; edges (i, j) with i < j, sorted.
struct TileGraph {
  std::vector<GridNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::vector<std::vector<std::size_t>> adjacency() const;
};

TileGraph build_tile_graph(std::vector<GridNode> nodes);
TileGraph tile_graph_from_predictions(std::span<const PredictionRecord> predictions, std::uint32_t tile_size);

nlohmann::json graph_json(const TileGraph& graph);
TileGraph graph_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------- MLP

struct MlpConfig {
  std::size_t hidden = 16;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
};

/// dense 6 -> H (ReLU) -> dense H -> 2 -> softmax.
class MLPModel {
 public:
  static MLPModel create(std::size_t hidden, std::uint64_t seed);

  std::size_t hidden() const noexcept { return hidden_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  std::array<double, 2> probabilities(const PatternFeatures& x) const;
  TMBLabel predict(const PatternFeatures& x) const;

  nlohmann::json to_json() const;
  static MLPModel from_json(const nlohmann::json& doc);

  friend bool operator==(const MLPModel&, const MLPModel&) = default;

 private:
  std::size_t hidden_ = 0;
  ParamStore params_;
};

/// Mean cross-entropy over the set; gradient written to grad if non-null.
double mlp_loss_and_gradient(const MLPModel& model, std::span<const PatternFeatures> features,
                             std::span<const TMBLabel> labels, std::vector<double>* grad);

struct MlpTrainResult {
  MLPModel model;
  std::vector<double> loss_curve;
  double train_accuracy = 0.0;
  std::size_t epochs_to_perfect = 0;  // first epoch with training accuracy 1, 0 if never
};

MlpTrainResult train_mlp(std::span<const PatternFeatures> features, std::span<const TMBLabel> labels,
                         const MlpConfig& config);

double mlp_gradient_check(const MLPModel& model, std::span<const PatternFeatures> features,
                          std::span<const TMBLabel> labels, double epsilon);

// ---------------------------------------------------------------- GNN

/// One mean-aggregation message-passing layer ([self ; neighbour mean] ->
/// dense H -> ReLU), global mean pool, dense -> 2 -> softmax. A node without
/// neighbours uses its own features as the neighbour mean.
class GNNModel {
 public:
  static GNNModel create(std::size_t hidden, std::uint64_t seed);

  std::size_t hidden() const noexcept { return hidden_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  nlohmann::json to_json() const;
  static GNNModel from_json(const nlohmann::json& doc);

 private:
  std::size_t hidden_ = 0;
  ParamStore params_;
};

/// Nodes are processed in (gy, gx) order, so the result does not depend on
/// the order nodes were supplied in.
std::array<double, 2> gnn_forward(const GNNModel& model, const TileGraph& graph);

double gnn_loss_and_gradient(const GNNModel& model, const TileGraph& graph, TMBLabel label,
                             std::vector<double>* grad);

double gnn_gradient_check(const GNNModel& model, const TileGraph& graph, TMBLabel label, double epsilon);

struct GnnTrainResult {
  GNNModel model;
  std::vector<double> loss_curve;
  double train_accuracy = 0.0;
};

GnnTrainResult train_gnn(std::span<const TileGraph> graphs, std::span<const TMBLabel> labels, const MlpConfig& config);

}  // namespace cellomaps
