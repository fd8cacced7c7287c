#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arcnet/errors.hpp"
#include "arcnet/graph.hpp"
#include "arcnet/tensor.hpp"

namespace arcnet {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* tensor;
};

/// Ordered, named view over trainable tensors owned elsewhere. The order is
/// the registration order and fixes the layout of optimizer state and
/// checkpoints.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, Tensor<T>& t) {
    if (t.data.empty()) return;
    if (by_name_.contains(name)) throw ValidationError("duplicate parameter name: " + name);
    by_name_.emplace(name, entries_.size());
    by_tensor_.emplace(&t, entries_.size());
    entries_.push_back({std::move(name), &t});
  }

  std::span<const NamedParam<T>> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor->size();
    return n;
  }

  Tensor<T>* find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    return it == by_name_.end() ? nullptr : entries_[it->second].tensor;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor->zero_grad();
  }

  /// Adds the graph's parameter gradients into the owned tensors' grad
  /// buffers. Tensors not in this set (frozen ones) are skipped.
  void accumulate(const Graph<T>& g) {
    for (const auto& pg : g.param_grads()) {
      auto it = by_tensor_.find(pg.tensor);
      if (it == by_tensor_.end()) continue;
      Tensor<T>& t = *entries_[it->second].tensor;
      if (t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), T{0});
      for (std::size_t i = 0; i < t.grad.size(); ++i) t.grad[i] += pg.grad[i];
    }
  }

 private:
  std::vector<NamedParam<T>> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<const Tensor<T>*, std::size_t> by_tensor_;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Fills `t` from uniform(-bound, bound) with a stream derived from the
/// global seed and the tensor name, so each tensor's values do not depend on
/// which other tensors exist.
template <typename T>
void init_uniform(Tensor<T>& t, std::uint64_t seed, std::string_view name, double bound) {
  const std::uint64_t h = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

/// Converts a tensor to another element type (checkpoint import/export).
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out;
  out.shape = src.shape;
  out.data.assign(src.data.begin(), src.data.end());
  out.requires_grad = src.requires_grad;
  return out;
}

}  // namespace arcnet
