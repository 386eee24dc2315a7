#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cellomaps {

/// Focal loss settings. An empty alpha means every class weighs 1.
struct FocalLossParams {
  double gamma = 0.7;
  std::vector<double> alpha;

  double alpha_for(std::size_t k) const { return alpha.empty() ? 1.0 : alpha[k]; }
  void validate(std::size_t class_count) const;
};

inline constexpr double kProbabilityFloor = 1e-12;

struct LossValue {
  double loss = 0.0;
  bool clamped = false;  // p_true fell below kProbabilityFloor
};

/// -alpha_t (1 - p_t)^gamma log p_t for a one-hot target t.
LossValue focal_loss(std::span<const double> probabilities, std::size_t true_class, const FocalLossParams& params);

/// In-place numerically stable softmax.
void softmax(std::span<double> values);

/// Focal loss evaluated on logits; writes dLoss/dlogit into grad (same length).
double focal_loss_logits(std::span<const double> logits, std::size_t true_class, const FocalLossParams& params,
                         std::span<double> grad);

/// Plain softmax cross-entropy with the textbook p - onehot gradient.
double cross_entropy_logits(std::span<const double> logits, std::size_t true_class, std::span<double> grad);

enum class LossKind { Focal, CrossEntropy, WeightedCrossEntropy };

std::string_view to_string(LossKind kind) noexcept;
LossKind loss_kind_from_string(std::string_view name);

/// 1/n_c rescaled so present classes average 1; absent classes get 1.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> class_counts);

}  // namespace cellomaps
