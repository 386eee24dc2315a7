#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cellomaps {

/// Named parameter tensors packed into one flat vector, so optimizers and
/// gradient checks can treat every model the same way.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  /// Appends a zero-filled tensor and returns its offset.
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  const Entry& entry(const std::string& name) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::span<double> view(const Entry& e) noexcept { return {values_.data() + e.offset, e.size}; }
  std::span<const double> view(const Entry& e) const noexcept { return {values_.data() + e.offset, e.size}; }
  std::span<double> view(const std::string& name) { return view(entry(name)); }
  std::span<const double> view(const std::string& name) const { return view(entry(name)); }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  nlohmann::json to_json() const;
  /// Layout must already match (names, shapes); only values are loaded.
  void load_json(const nlohmann::json& tensors);

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<Entry> entries_;
  std::vector<double> values_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t parameter_count, AdamConfig config);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

/// Central differences of `loss` w.r.t. params[indices]; params are restored.
std::vector<double> central_differences(std::vector<double>& params, std::span<const std::size_t> indices,
                                        double epsilon, const std::function<double()>& loss);

/// |a - n| / max(|a|, |n|, floor), maximized over entries.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-7);

}  // namespace cellomaps
