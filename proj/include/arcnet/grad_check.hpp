#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "arcnet/errors.hpp"
#include "arcnet/graph.hpp"
#include "arcnet/params.hpp"

namespace arcnet {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients of `loss` against central differences
/// (f(θ+h) - f(θ-h)) / 2h for every entry of every parameter in `params`.
/// `loss` builds the scalar on a fresh graph and must be deterministic.
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
template <typename T, typename LossFn>
GradCheckResult grad_check(LossFn&& loss, const ParamSet<T>& params, double h = 1e-5) {
  auto evaluate = [&]() {
    Graph<T> g;
    const double v = static_cast<double>(g.item(loss(g)));
    if (!std::isfinite(v)) throw NumericalError("grad_check: loss evaluated to a non-finite value");
    return v;
  };

  Graph<T> g;
  Var root = loss(g);
  if (!std::isfinite(static_cast<double>(g.item(root)))) {
    throw NumericalError("grad_check: loss evaluated to a non-finite value");
  }
  g.backward(root);
  std::unordered_map<const Tensor<T>*, std::span<const T>> analytic;
  for (const auto& pg : g.param_grads()) analytic.emplace(pg.tensor, pg.grad);

  GradCheckResult result;
  for (const auto& entry : params.entries()) {
    Tensor<T>& t = *entry.tensor;
    auto it = analytic.find(&t);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double a = it == analytic.end() ? 0.0 : static_cast<double>(it->second[i]);
      const T saved = t.data[i];
      t.data[i] = static_cast<T>(static_cast<double>(saved) + h);
      const double up = evaluate();
      t.data[i] = static_cast<T>(static_cast<double>(saved) - h);
      const double down = evaluate();
      t.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (result.worst_param.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = entry.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

/// Same comparison, but the central differences are taken on a mirror of
/// the parameters in a wider type R (e.g. long double) evaluated by
/// `loss_ref`. Analytic gradients still come from `loss` in type T. Useful
/// when the loss is large relative to some gradient entries and the f64
/// difference quotient is limited by the rounding of the loss itself.
/// `mirror` must hold the same names and shapes as `params`.
template <typename T, typename R, typename LossFn, typename RefFn>
GradCheckResult grad_check_reference(LossFn&& loss, const ParamSet<T>& params, RefFn&& loss_ref,
                                     const ParamSet<R>& mirror, double h = 1e-5) {
  if (mirror.size() != params.size()) throw ValidationError("grad_check_reference: parameter sets differ");
  auto evaluate = [&]() {
    Graph<R> g;
    const R v = g.item(loss_ref(g));
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericalError("grad_check: loss evaluated to a non-finite value");
    }
    return v;
  };

  Graph<T> g;
  Var root = loss(g);
  if (!std::isfinite(static_cast<double>(g.item(root)))) {
    throw NumericalError("grad_check: loss evaluated to a non-finite value");
  }
  g.backward(root);
  std::unordered_map<const Tensor<T>*, std::span<const T>> analytic;
  for (const auto& pg : g.param_grads()) analytic.emplace(pg.tensor, pg.grad);

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& entry = params.entries()[k];
    const auto& ref = mirror.entries()[k];
    if (ref.name != entry.name || ref.tensor->shape != entry.tensor->shape) {
      throw ValidationError("grad_check_reference: mirror differs at '" + entry.name + "'");
    }
    Tensor<R>& t = *ref.tensor;
    auto it = analytic.find(entry.tensor);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double a = it == analytic.end() ? 0.0 : static_cast<double>(it->second[i]);
      const R saved = t.data[i];
      t.data[i] = saved + static_cast<R>(h);
      const R up = evaluate();
      t.data[i] = saved - static_cast<R>(h);
      const R down = evaluate();
      t.data[i] = saved;
      const double numeric = static_cast<double>((up - down) / (R{2} * static_cast<R>(h)));
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (result.worst_param.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = entry.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace arcnet
