#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cellomaps/bitplane.hpp"
#include "cellomaps/loss.hpp"
#include "cellomaps/params.hpp"
#include "cellomaps/prediction.hpp"
#include "cellomaps/tiler.hpp"

namespace cellomaps {

// ---------------------------------------------------------------- front layer

inline constexpr int kFrontKernel = 5;

/// 5x5 all-ones binary dilation (zero padding) followed by 2x2/stride-2 max
/// pooling, per channel. Requires square planes with an even side.
std::vector<BitPlane> dilate_front(std::span<const BitPlane> channels);
BitPlane dilate_front(const BitPlane& channel);

/// Single grayscale plane holding every nucleus regardless of class.
BitPlane merge_planes(std::span<const BitPlane> channels);

// ---------------------------------------------------------------- model

struct ClassifierConfig {
  std::uint32_t tile_size = 448;
  std::size_t map_channels = 3;  // channels carried by the input tiles
  bool merge_channels = false;   // collapse all channels into one before the network

  std::size_t network_channels() const noexcept { return merge_channels ? 1 : map_channels; }
  void validate() const;
  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

inline constexpr std::array<std::size_t, 3> kConvWidths = {16, 32, 64};

/// Dilation front -> conv3x3(16) ReLU pool -> conv3x3(32) ReLU pool ->
/// conv3x3(64) ReLU -> global average pool -> dense(6) -> softmax.
class ClassifierModel {
 public:
  static ClassifierModel create(const ClassifierConfig& config, std::uint64_t seed);

  const ClassifierConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  void zero_head();
  /// Indices (into params().values()) of the dense head only.
  std::vector<std::size_t> head_indices() const;

  nlohmann::json to_json() const;
  static ClassifierModel from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  ClassifierConfig config_;
  ParamStore params_;
};

/// Front-layer output for one tile, already binary and half resolution.
struct FrontTile {
  std::vector<BitPlane> planes;
};

/// Applies channel merging (if configured) and the dilation front.
FrontTile prepare_input(const ClassifierModel& model, std::span<const BitPlane> tile_planes);

std::array<double, kPatternCount> forward_probabilities(const ClassifierModel& model, const FrontTile& input,
                                                       bool flip_horizontal = false, bool flip_vertical = false);

/// Throws ShapeMismatch when the tile does not fit the model.
PredictionRecord forward(const ClassifierModel& model, const Tile& tile);
std::vector<PredictionRecord> predict_all(const ClassifierModel& model, std::span<const LabeledTile> tiles,
                                          std::size_t workers = 1);

struct LossSpec {
  LossKind kind = LossKind::Focal;
  FocalLossParams focal;
  std::vector<double> class_weights;  // used by WeightedCrossEntropy

  double evaluate(std::span<const double> logits, std::size_t true_class, std::span<double> grad) const;
};

/// Loss of one example; if grad is non-null it receives dLoss/dparams
/// (resized to the parameter count).
double loss_and_gradient(const ClassifierModel& model, const FrontTile& input, std::size_t true_class,
                         const LossSpec& loss, std::vector<double>* grad, bool flip_horizontal = false,
                         bool flip_vertical = false);

enum class GradientScope { All, HeadOnly };

/// Max relative error between backprop and central differences over the
/// selected parameters.
double gradient_check(const ClassifierModel& model, const Tile& tile, std::size_t true_class, double epsilon,
                      const LossSpec& loss = {}, GradientScope scope = GradientScope::All);

// ---------------------------------------------------------------- training

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double horizontal_flip = 0.5;
  double vertical_flip = 0.5;
  LossKind loss = LossKind::Focal;
  FocalLossParams focal;
  std::size_t workers = 1;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  ClassifierModel model;  // parameters from the best validation macro-F1 epoch
  std::vector<EpochLog> curve;
  std::size_t best_epoch = 0;
};

TrainResult train(const ClassifierModel& initial, std::span<const LabeledTile> train_set,
                  std::span<const LabeledTile> val_set, const TrainConfig& config);

/// Flip decisions for one tile in one epoch; a pure function of the seed.
std::pair<bool, bool> flip_decision(const TrainConfig& config, std::size_t epoch, std::size_t tile_index);

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> curve);

}  // namespace cellomaps
