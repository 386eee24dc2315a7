#include "cellomaps/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cellomaps/error.hpp"

namespace cellomaps {

void FocalLossParams::validate(std::size_t class_count) const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidArgument, "gamma must be >= 0");
  if (!alpha.empty()) {
    if (alpha.size() != class_count) {
      throw Error(ErrorCode::InvalidArgument, "alpha has " + std::to_string(alpha.size()) + " entries, expected " +
                                                  std::to_string(class_count));
    }
    for (double a : alpha)
      if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha entries must be positive");
  }
}

LossValue focal_loss(std::span<const double> probabilities, std::size_t true_class, const FocalLossParams& params) {
  if (true_class >= probabilities.size()) throw Error(ErrorCode::InvalidArgument, "true class out of range");
  params.validate(probabilities.size());
  const double p = probabilities[true_class];
  LossValue out;
  double pc = p;
  if (pc < kProbabilityFloor) {
    pc = kProbabilityFloor;
    out.clamped = true;
  }
  const double q = std::max(0.0, 1.0 - p);
  const double modulation = params.gamma == 0.0 ? 1.0 : std::pow(q, params.gamma);
  out.loss = -params.alpha_for(true_class) * modulation * std::log(pc);
  if (out.loss == 0.0) out.loss = 0.0;  // fold -0
  return out;
}

void softmax(std::span<double> values) {
  if (values.empty()) return;
  const double m = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (auto& v : values) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : values) v /= sum;
}

double focal_loss_logits(std::span<const double> logits, std::size_t true_class, const FocalLossParams& params,
                         std::span<double> grad) {
  const std::size_t k = logits.size();
  if (true_class >= k || grad.size() != k) throw Error(ErrorCode::InvalidArgument, "logit/grad shape mismatch");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::exp(logits[i] - m);
  const double log_p = logits[true_class] - m - std::log(sum);
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) p[i] = std::exp(logits[i] - m) / sum;

  const double a = params.alpha_for(true_class);
  const double g = params.gamma;
  const double pt = p[true_class];
  // 1 - p_t from the other classes keeps precision when p_t is near 1.
  double q = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (i != true_class) q += p[i];

  const double loss = g == 0.0 ? -a * log_p : -a * std::pow(q, g) * log_p;
  if (q <= 0.0) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return loss;
  }
  // dL/dz_j = c * (delta_tj - p_j) with c = dL/dp_t * p_t
  //         = a * (g q^(g-1) p_t log p_t - q^g).
  const double qg = g == 0.0 ? 1.0 : std::pow(q, g);
  const double c = a * (g == 0.0 ? -1.0 : g * (qg / q) * pt * log_p - qg);
  for (std::size_t j = 0; j < k; ++j) grad[j] = c * ((j == true_class ? 1.0 : 0.0) - p[j]);
  // For j == t the factor (1 - p_t) is better taken as q.
  grad[true_class] = c * q;
  return loss;
}

double cross_entropy_logits(std::span<const double> logits, std::size_t true_class, std::span<double> grad) {
  const std::size_t k = logits.size();
  if (true_class >= k || grad.size() != k) throw Error(ErrorCode::InvalidArgument, "logit/grad shape mismatch");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::exp(logits[i] - m);
  for (std::size_t i = 0; i < k; ++i) grad[i] = std::exp(logits[i] - m) / sum - (i == true_class ? 1.0 : 0.0);
  return -(logits[true_class] - m - std::log(sum));
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::Focal: return "focal";
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::WeightedCrossEntropy: return "weighted_cross_entropy";
  }
  return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "focal" || name == "fl") return LossKind::Focal;
  if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
  if (name == "weighted_cross_entropy" || name == "wce") return LossKind::WeightedCrossEntropy;
  throw Error(ErrorCode::InvalidArgument, "unknown loss '" + std::string(name) + "'");
}

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> class_counts) {
  std::vector<double> w(class_counts.size(), 1.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < class_counts.size(); ++i) {
    if (class_counts[i] == 0) continue;
    w[i] = 1.0 / static_cast<double>(class_counts[i]);
    sum += w[i];
    ++present;
  }
  if (present == 0) return w;
  const double mean = sum / static_cast<double>(present);
  for (std::size_t i = 0; i < class_counts.size(); ++i)
    if (class_counts[i] != 0) w[i] /= mean;
  return w;
}

}  // namespace cellomaps
