#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "arcnet/errors.hpp"
#include "arcnet/params.hpp"

namespace arcnet {

enum class WeightDecayMode {
  Decoupled,  // θ -= lr * (m̂ / (sqrt(v̂) + ε) + wd * θ)
  Coupled,    // g += wd * θ before the moment updates
};

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  WeightDecayMode decay = WeightDecayMode::Decoupled;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first;   // per parameter, same layout as its data
  std::vector<std::vector<T>> second;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam over a ParamSet. Moments follow the set's order.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& e : params_.entries()) {
      state_.first.emplace_back(e.tensor->size(), T{0});
      state_.second.emplace_back(e.tensor->size(), T{0});
    }
  }

  const AdamConfig& config() const { return cfg_; }
  const AdamState<T>& state() const { return state_; }

  void load_state(AdamState<T> s) {
    if (s.first.size() != params_.size() || s.second.size() != params_.size()) {
      throw ValidationError("optimizer state does not match the parameter set");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const std::size_t n = params_.entries()[i].tensor->size();
      if (s.first[i].size() != n || s.second[i].size() != n) {
        throw ValidationError("optimizer state for '" + params_.entries()[i].name + "' has the wrong size");
      }
    }
    state_ = std::move(s);
  }

  /// Applies one update from the grads currently stored on the tensors.
  /// Tensors without a grad buffer are treated as having zero gradient.
  void step() {
    for (const auto& e : params_.entries()) {
      for (T v : e.tensor->grad) {
        if (!std::isfinite(static_cast<double>(v))) {
          throw NumericalError("adam: non-finite gradient in parameter group '" + e.name + "'");
        }
      }
    }
    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    const bool coupled = cfg_.decay == WeightDecayMode::Coupled;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<T>& p = *params_.entries()[k].tensor;
      auto& m = state_.first[k];
      auto& v = state_.second[k];
      const bool has_grad = p.grad.size() == p.data.size();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double theta = static_cast<double>(p.data[i]);
        double g = has_grad ? static_cast<double>(p.grad[i]) : 0.0;
        if (coupled) g += cfg_.weight_decay * theta;
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        double delta = (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
        if (!coupled) delta += cfg_.weight_decay * theta;
        p.data[i] = static_cast<T>(theta - cfg_.lr * delta);
      }
    }
  }

 private:
  const ParamSet<T>& params_;
  AdamConfig cfg_;
  AdamState<T> state_;
};

}  // namespace arcnet
