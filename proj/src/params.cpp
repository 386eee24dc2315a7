#include "cellomaps/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellomaps/error.hpp"

namespace cellomaps {

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  const std::size_t size = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  Entry e{std::move(name), std::move(shape), values_.size(), size};
  values_.resize(values_.size() + size, 0.0);
  entries_.push_back(std::move(e));
  return entries_.back().offset;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw Error(ErrorCode::InvalidArgument, "no parameter named '" + name + "'");
}

nlohmann::json ParamStore::to_json() const {
  auto out = nlohmann::json::array();
  for (const auto& e : entries_) {
    const auto v = view(e);
    out.push_back({{"name", e.name}, {"shape", e.shape}, {"values", std::vector<double>(v.begin(), v.end())}});
  }
  return out;
}

void ParamStore::load_json(const nlohmann::json& tensors) {
  try {
    if (!tensors.is_array() || tensors.size() != entries_.size()) {
      throw Error(ErrorCode::MalformedInput, "checkpoint tensor count mismatch");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& t = tensors[i];
      const auto& e = entries_[i];
      if (t.at("name").get<std::string>() != e.name || t.at("shape").get<std::vector<std::size_t>>() != e.shape) {
        throw Error(ErrorCode::MalformedInput, "checkpoint tensor '" + e.name + "' has unexpected name or shape");
      }
      const auto values = t.at("values").get<std::vector<double>>();
      if (values.size() != e.size) throw Error(ErrorCode::MalformedInput, "tensor '" + e.name + "' size mismatch");
      std::copy(values.begin(), values.end(), values_.begin() + static_cast<std::ptrdiff_t>(e.offset));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::MalformedInput, ex.what());
  }
}

Adam::Adam(std::size_t parameter_count, AdamConfig config)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  if (!(config.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be >= 0");
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam parameter count mismatch");
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
  }
}

std::vector<double> central_differences(std::vector<double>& params, std::span<const std::size_t> indices,
                                        double epsilon, const std::function<double()>& loss) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss();
    params[i] = saved - epsilon;
    const double down = loss();
    params[i] = saved;
    out.push_back((up - down) / (2.0 * epsilon));
  }
  return out;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw Error(ErrorCode::LengthMismatch, "gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace cellomaps
