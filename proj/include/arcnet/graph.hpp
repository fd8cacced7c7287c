#pragma once

// Define-by-run expression graph with reverse-mode differentiation.
//
// Nodes are appended in evaluation order, which is also a topological order,
// so backward is a single reverse sweep over the node array. Parameter leaves
// reference the caller's tensors without copying; their gradients stay inside
// the graph until a ParamSet pulls them out (see params.hpp).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arcnet/errors.hpp"
#include "arcnet/kernels.hpp"
#include "arcnet/tensor.hpp"

namespace arcnet {

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

inline void warn_probability_floor() {
  static std::once_flag once;
  std::call_once(once, [] {
    std::cerr << "arcnet: probability clamped at floor " << kProbabilityFloor
              << " inside a log-loss (reported once)\n";
  });
}

}  // namespace detail

/// Handle to a node in a Graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

template <typename T>
struct ParamGrad {
  const Tensor<T>* tensor;
  std::span<const T> grad;
};

template <typename T>
class Graph {
 public:
  enum class Op : std::uint8_t {
    Input,
    Param,
    Detach,
    MatVec,
    MatVecT,
    Add,
    Sub,
    Mul,
    AbsDiff,
    Sigmoid,
    Tanh,
    Softmax,
    Scale,
    Affine,
    ScalarMul,
    Concat,
    Dot,
    Mix,
    Sum,
    CrossEntropy,
    Bce,
  };

  // ---- leaves ------------------------------------------------------------

  template <typename U>
  Var constant(std::span<const U> values) {
    Node n;
    n.op = Op::Input;
    n.shape = {values.size()};
    n.value.assign(values.begin(), values.end());
    check_nonempty(n, "constant");
    return push(std::move(n));
  }

  Var constant(std::vector<T> values) { return constant(std::span<const T>(values)); }

  template <typename U>
  Var constant(const std::vector<U>& values) {
    return constant(std::span<const U>(values));
  }

  Var constant(std::vector<T> values, Shape shape) {
    if (shape_size(shape) != values.size()) {
      throw ShapeError("constant: data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_string(shape));
    }
    Node n;
    n.op = Op::Input;
    n.shape = std::move(shape);
    n.value = std::move(values);
    return push(std::move(n));
  }

  Var scalar(T v) { return constant(std::vector<T>{v}); }

  Var zeros(std::size_t n) { return constant(std::vector<T>(n, T{0})); }

  /// Trainable leaf. Repeated calls with the same tensor return the same node.
  Var param(const Tensor<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
    if (p.data.empty()) throw ShapeError("param: tensor is empty");
    Node n;
    n.op = Op::Param;
    n.shape = p.shape;
    n.tensor = &p;
    n.needs_grad = true;
    Var v = push(std::move(n));
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  /// Copy of a value that blocks gradient flow.
  Var detach(Var a) {
    Node n;
    n.op = Op::Detach;
    n.shape = shape(a);
    auto src = value(a);
    n.value.assign(src.begin(), src.end());
    return push(std::move(n));
  }

  // ---- primitives --------------------------------------------------------

  /// y = W x for W of shape [r x c] and x of length c.
  Var matvec(Var w, Var x) {
    const auto& ws = shape(w);
    if (ws.size() != 2 || size(x) != ws[1] || shape(x).size() != 1) {
      throw ShapeError("matvec: cannot multiply W " + shape_string(ws) + " by x " +
                       shape_string(shape(x)));
    }
    Node n = make(Op::MatVec, {w, x}, {ws[0]});
    kernels::matvec<T>(value(w), ws[0], ws[1], value(x), n.value);
    return push(std::move(n));
  }

  /// y = W^T x for W of shape [r x c] and x of length r.
  Var matvec_t(Var w, Var x) {
    const auto& ws = shape(w);
    if (ws.size() != 2 || size(x) != ws[0] || shape(x).size() != 1) {
      throw ShapeError("matvec_t: cannot multiply W^T for W " + shape_string(ws) + " by x " +
                       shape_string(shape(x)));
    }
    Node n = make(Op::MatVecT, {w, x}, {ws[1]});
    kernels::matvec_t<T>(value(w), ws[0], ws[1], value(x), n.value);
    return push(std::move(n));
  }

  Var add(Var a, Var b) { return binary(Op::Add, "add", a, b, [](T x, T y) { return x + y; }); }
  Var sub(Var a, Var b) { return binary(Op::Sub, "sub", a, b, [](T x, T y) { return x - y; }); }
  Var mul(Var a, Var b) { return binary(Op::Mul, "mul", a, b, [](T x, T y) { return x * y; }); }
  Var abs_diff(Var a, Var b) {
    return binary(Op::AbsDiff, "abs_diff", a, b, [](T x, T y) { return std::abs(x - y); });
  }

  Var sigmoid(Var a) {
    return unary(Op::Sigmoid, a, [](T x) {
      if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
      const T e = std::exp(x);
      return e / (T{1} + e);
    });
  }

  Var tanh(Var a) {
    return unary(Op::Tanh, a, [](T x) { return std::tanh(x); });
  }

  Var softmax(Var a) {
    Node n = make(Op::Softmax, {a}, shape(a));
    auto x = value(a);
    const T hi = *std::max_element(x.begin(), x.end());
    T total{0};
    for (std::size_t i = 0; i < x.size(); ++i) {
      n.value[i] = std::exp(x[i] - hi);
      total += n.value[i];
    }
    for (auto& v : n.value) v /= total;
    return push(std::move(n));
  }

  Var scale(Var a, T s) {
    Node n = make(Op::Scale, {a}, shape(a));
    n.a = s;
    auto x = value(a);
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = s * x[i];
    return push(std::move(n));
  }

  /// s * a + b elementwise (e.g. 1 - p with s = -1, b = 1).
  Var affine(Var a, T s, T b) {
    Node n = make(Op::Affine, {a}, shape(a));
    n.a = s;
    n.b = b;
    auto x = value(a);
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = s * x[i] + b;
    return push(std::move(n));
  }

  /// Scalar times vector.
  Var scalar_mul(Var s, Var v) {
    if (size(s) != 1) {
      throw ShapeError("scalar_mul: first operand must be a scalar, got " + shape_string(shape(s)));
    }
    Node n = make(Op::ScalarMul, {s, v}, shape(v));
    const T k = value(s)[0];
    auto x = value(v);
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = k * x[i];
    return push(std::move(n));
  }

  Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::size_t total = 0;
    for (Var p : parts) {
      if (shape(p).size() != 1) throw ShapeError("concat: operand " + shape_string(shape(p)) + " is not a vector");
      total += size(p);
    }
    Node n = make(Op::Concat, parts, {total});
    std::size_t off = 0;
    for (Var p : parts) {
      auto x = value(p);
      std::copy(x.begin(), x.end(), n.value.begin() + static_cast<std::ptrdiff_t>(off));
      off += x.size();
    }
    return push(std::move(n));
  }

  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }

  Var dot(Var a, Var b) {
    require_same(a, b, "dot");
    Node n = make(Op::Dot, {a, b}, {1});
    auto x = value(a);
    auto y = value(b);
    T acc{0};
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    n.value[0] = acc;
    return push(std::move(n));
  }

  /// sum_j weights[j] * vectors[j]
  Var mix(Var weights, std::span<const Var> vectors) {
    if (vectors.empty()) throw ShapeError("mix: no vectors");
    if (size(weights) != vectors.size()) {
      throw ShapeError("mix: " + std::to_string(size(weights)) + " weights for " +
                       std::to_string(vectors.size()) + " vectors");
    }
    for (Var v : vectors) require_same(vectors[0], v, "mix");
    std::vector<Var> parents{weights};
    parents.insert(parents.end(), vectors.begin(), vectors.end());
    Node n = make(Op::Mix, parents, shape(vectors[0]));
    auto w = value(weights);
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      auto x = value(vectors[j]);
      for (std::size_t i = 0; i < x.size(); ++i) n.value[i] += w[j] * x[i];
    }
    return push(std::move(n));
  }

  /// Elementwise sum of equally shaped operands.
  Var sum(std::span<const Var> terms) {
    if (terms.empty()) throw ShapeError("sum: no operands");
    for (Var v : terms) require_same(terms[0], v, "sum");
    Node n = make(Op::Sum, terms, shape(terms[0]));
    for (Var v : terms) {
      auto x = value(v);
      for (std::size_t i = 0; i < x.size(); ++i) n.value[i] += x[i];
    }
    return push(std::move(n));
  }

  /// -log probs[target]; probabilities below the floor are clamped.
  Var cross_entropy(Var probs, std::size_t target) {
    if (target >= size(probs)) {
      throw ValidationError("cross_entropy: target " + std::to_string(target) + " outside " +
                            std::to_string(size(probs)) + " classes");
    }
    Node n = make(Op::CrossEntropy, {probs}, {1});
    n.index = target;
    T p = value(probs)[target];
    if (p < static_cast<T>(kProbabilityFloor)) {
      detail::warn_probability_floor();
      n.clamped = true;
      p = static_cast<T>(kProbabilityFloor);
    }
    n.value[0] = -std::log(p);
    return push(std::move(n));
  }

  /// -[y log p + (1-y) log(1-p)] for a scalar probability p.
  Var bce(Var p, int label) {
    if (size(p) != 1) throw ShapeError("bce: probability must be a scalar, got " + shape_string(shape(p)));
    if (label != 0 && label != 1) throw ValidationError("bce: label must be 0 or 1");
    Node n = make(Op::Bce, {p}, {1});
    n.index = static_cast<std::size_t>(label);
    const T floor = static_cast<T>(kProbabilityFloor);
    T q = value(p)[0];
    if (q < floor || q > T{1} - floor) {
      detail::warn_probability_floor();
      n.clamped = true;
      q = std::clamp(q, floor, T{1} - floor);
    }
    n.value[0] = label == 1 ? -std::log(q) : -std::log(T{1} - q);
    return push(std::move(n));
  }

  /// Name-based dispatch over the primitive set. `arg` feeds `scale`.
  Var apply(std::string_view op, std::span<const Var> in, T arg = T{1}) {
    auto want = [&](std::size_t k) {
      if (in.size() != k) {
        throw ShapeError(std::string(op) + ": expected " + std::to_string(k) + " operands, got " +
                         std::to_string(in.size()));
      }
    };
    if (op == "matvec") return want(2), matvec(in[0], in[1]);
    if (op == "matvec_t") return want(2), matvec_t(in[0], in[1]);
    if (op == "add") return want(2), add(in[0], in[1]);
    if (op == "sub") return want(2), sub(in[0], in[1]);
    if (op == "mul") return want(2), mul(in[0], in[1]);
    if (op == "abs_diff") return want(2), abs_diff(in[0], in[1]);
    if (op == "sigmoid") return want(1), sigmoid(in[0]);
    if (op == "tanh") return want(1), tanh(in[0]);
    if (op == "softmax") return want(1), softmax(in[0]);
    if (op == "scale") return want(1), scale(in[0], arg);
    if (op == "scalar_mul") return want(2), scalar_mul(in[0], in[1]);
    if (op == "concat") return concat(in);
    if (op == "dot") return want(2), dot(in[0], in[1]);
    if (op == "mix") {
      if (in.empty()) throw ShapeError("mix: no operands");
      return mix(in[0], in.subspan(1));
    }
    if (op == "sum") return sum(in);
    throw ValidationError("apply: unknown primitive '" + std::string(op) + "'");
  }

  // ---- inspection --------------------------------------------------------

  std::span<const T> value(Var v) const {
    const Node& n = node(v);
    if (n.op == Op::Param) return n.tensor->data;
    return n.value;
  }

  T item(Var v) const {
    if (size(v) != 1) throw ShapeError("item: tensor " + shape_string(shape(v)) + " is not a scalar");
    return value(v)[0];
  }

  std::vector<T> to_vector(Var v) const {
    auto x = value(v);
    return {x.begin(), x.end()};
  }

  /// Gradient of the last backward root w.r.t. v; empty when v received none.
  std::span<const T> grad(Var v) const { return node(v).grad; }

  const Shape& shape(Var v) const { return node(v).shape; }
  std::size_t size(Var v) const { return shape_size(node(v).shape); }
  std::size_t node_count() const { return nodes_.size(); }

  // ---- differentiation ---------------------------------------------------

  void backward(Var root) {
    if (size(root) != 1) {
      throw ShapeError("backward: root must be a scalar, got " + shape_string(shape(root)));
    }
    for (auto& n : nodes_) n.grad.clear();
    ensure_grad(root.id);
    nodes_[root.id].grad[0] = T{1};
    for (std::size_t i = root.id + 1; i-- > 0;) {
      if (!nodes_[i].grad.empty() && nodes_[i].needs_grad) propagate(i);
    }
  }

  /// Gradients of every parameter leaf reached by the last backward, in
  /// node-creation order.
  std::vector<ParamGrad<T>> param_grads() const {
    std::vector<ParamGrad<T>> out;
    for (const auto& n : nodes_) {
      if (n.op == Op::Param && !n.grad.empty()) out.push_back({n.tensor, n.grad});
    }
    return out;
  }

 private:
  struct Node {
    Op op = Op::Input;
    std::vector<std::size_t> parents;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    const Tensor<T>* tensor = nullptr;
    T a{}, b{};
    std::size_t index = 0;
    bool needs_grad = false;
    bool clamped = false;
  };

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw ValidationError("graph: invalid variable handle");
    return nodes_[v.id];
  }

  Var push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  static void check_nonempty(const Node& n, const char* what) {
    if (n.value.empty()) throw ShapeError(std::string(what) + ": empty tensor");
  }

  Node make(Op op, std::span<const Var> parents, Shape out_shape) {
    Node n;
    n.op = op;
    n.parents.reserve(parents.size());
    for (Var p : parents) {
      node(p);
      n.parents.push_back(p.id);
      n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
    }
    n.shape = std::move(out_shape);
    n.value.assign(shape_size(n.shape), T{0});
    return n;
  }

  Node make(Op op, std::initializer_list<Var> parents, Shape out_shape) {
    return make(op, std::span<const Var>(parents.begin(), parents.size()), std::move(out_shape));
  }

  void require_same(Var a, Var b, const char* what) const {
    if (shape(a) != shape(b)) {
      throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(shape(a)) + " vs " +
                       shape_string(shape(b)));
    }
  }

  template <typename F>
  Var binary(Op op, const char* what, Var a, Var b, F f) {
    require_same(a, b, what);
    Node n = make(op, {a, b}, shape(a));
    auto x = value(a);
    auto y = value(b);
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f(x[i], y[i]);
    return push(std::move(n));
  }

  template <typename F>
  Var unary(Op op, Var a, F f) {
    Node n = make(op, {a}, shape(a));
    auto x = value(a);
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f(x[i]);
    return push(std::move(n));
  }

  std::vector<T>& ensure_grad(std::size_t i) {
    auto& g = nodes_[i].grad;
    if (g.empty()) g.assign(shape_size(nodes_[i].shape), T{0});
    return g;
  }

  // Returns the parent's gradient buffer, or nullptr if it takes no gradient.
  T* pgrad(std::size_t parent) {
    if (!nodes_[parent].needs_grad) return nullptr;
    return ensure_grad(parent).data();
  }

  void propagate(std::size_t i) {
    // Copy what we need: ensure_grad may touch other nodes but never this one,
    // and nodes_ is not resized during backward, so references stay valid.
    const Node& n = nodes_[i];
    const std::vector<T>& g = n.grad;
    const std::size_t len = g.size();
    switch (n.op) {
      case Op::Input:
      case Op::Param:
      case Op::Detach:
        break;
      case Op::MatVec: {
        const std::size_t w = n.parents[0], x = n.parents[1];
        const auto& ws = nodes_[w].shape;
        if (T* gw = pgrad(w)) {
          kernels::add_outer<T>(std::span<T>(gw, ws[0] * ws[1]), ws[0], ws[1], g, value(Var{x}));
        }
        if (T* gx = pgrad(x)) {
          std::vector<T> tmp(ws[1]);
          kernels::matvec_t<T>(value(Var{w}), ws[0], ws[1], g, tmp);
          for (std::size_t j = 0; j < ws[1]; ++j) gx[j] += tmp[j];
        }
        break;
      }
      case Op::MatVecT: {
        const std::size_t w = n.parents[0], x = n.parents[1];
        const auto& ws = nodes_[w].shape;
        if (T* gw = pgrad(w)) {
          kernels::add_outer<T>(std::span<T>(gw, ws[0] * ws[1]), ws[0], ws[1], value(Var{x}), g);
        }
        if (T* gx = pgrad(x)) {
          std::vector<T> tmp(ws[0]);
          kernels::matvec<T>(value(Var{w}), ws[0], ws[1], g, tmp);
          for (std::size_t r = 0; r < ws[0]; ++r) gx[r] += tmp[r];
        }
        break;
      }
      case Op::Add:
        for (std::size_t p : n.parents) {
          if (T* gp = pgrad(p)) {
            for (std::size_t k = 0; k < len; ++k) gp[k] += g[k];
          }
        }
        break;
      case Op::Sub:
        if (T* ga = pgrad(n.parents[0])) {
          for (std::size_t k = 0; k < len; ++k) ga[k] += g[k];
        }
        if (T* gb = pgrad(n.parents[1])) {
          for (std::size_t k = 0; k < len; ++k) gb[k] -= g[k];
        }
        break;
      case Op::Mul: {
        auto x = value(Var{n.parents[0]});
        auto y = value(Var{n.parents[1]});
        if (T* ga = pgrad(n.parents[0])) {
          for (std::size_t k = 0; k < len; ++k) ga[k] += g[k] * y[k];
        }
        if (T* gb = pgrad(n.parents[1])) {
          for (std::size_t k = 0; k < len; ++k) gb[k] += g[k] * x[k];
        }
        break;
      }
      case Op::AbsDiff: {
        auto x = value(Var{n.parents[0]});
        auto y = value(Var{n.parents[1]});
        auto sign = [&](std::size_t k) {
          return x[k] > y[k] ? T{1} : (x[k] < y[k] ? T{-1} : T{0});
        };
        if (T* ga = pgrad(n.parents[0])) {
          for (std::size_t k = 0; k < len; ++k) ga[k] += g[k] * sign(k);
        }
        if (T* gb = pgrad(n.parents[1])) {
          for (std::size_t k = 0; k < len; ++k) gb[k] -= g[k] * sign(k);
        }
        break;
      }
      case Op::Sigmoid:
        if (T* ga = pgrad(n.parents[0])) {
          for (std::size_t k = 0; k < len; ++k) ga[k] += g[k] * n.value[k] * (T{1} - n.value[k]);
        }
        break;
      case Op::Tanh:
        if (T* ga = pgrad(n.parents[0])) {
          for (std::size_t k = 0; k < len; ++k) ga[k] += g[k] * (T{1} - n.value[k] * n.value[k]);
        }
        break;
      case Op::Softmax:
        if (T* ga = pgrad(n.parents[0])) {
          T inner{0};
          for (std::size_t k = 0; k < len; ++k) inner += g[k] * n.value[k];
          for (std::size_t k = 0; k < len; ++k) ga[k] += n.value[k] * (g[k] - inner);
        }
        break;
      case Op::Scale:
      case Op::Affine:
        if (T* ga = pgrad(n.parents[0])) {
          for (std::size_t k = 0; k < len; ++k) ga[k] += n.a * g[k];
        }
        break;
      case Op::ScalarMul: {
        const std::size_t s = n.parents[0], v = n.parents[1];
        auto x = value(Var{v});
        const T k0 = value(Var{s})[0];
        if (T* gs = pgrad(s)) {
          T acc{0};
          for (std::size_t k = 0; k < len; ++k) acc += g[k] * x[k];
          gs[0] += acc;
        }
        if (T* gv = pgrad(v)) {
          for (std::size_t k = 0; k < len; ++k) gv[k] += k0 * g[k];
        }
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (std::size_t p : n.parents) {
          const std::size_t m = shape_size(nodes_[p].shape);
          if (T* gp = pgrad(p)) {
            for (std::size_t k = 0; k < m; ++k) gp[k] += g[off + k];
          }
          off += m;
        }
        break;
      }
      case Op::Dot: {
        const std::size_t a = n.parents[0], b = n.parents[1];
        auto x = value(Var{a});
        auto y = value(Var{b});
        if (T* ga = pgrad(a)) {
          for (std::size_t k = 0; k < x.size(); ++k) ga[k] += g[0] * y[k];
        }
        if (T* gb = pgrad(b)) {
          for (std::size_t k = 0; k < x.size(); ++k) gb[k] += g[0] * x[k];
        }
        break;
      }
      case Op::Mix: {
        const std::size_t wn = n.parents[0];
        auto w = value(Var{wn});
        T* gw = pgrad(wn);
        for (std::size_t j = 1; j < n.parents.size(); ++j) {
          const std::size_t v = n.parents[j];
          auto x = value(Var{v});
          if (gw) {
            T acc{0};
            for (std::size_t k = 0; k < len; ++k) acc += g[k] * x[k];
            gw[j - 1] += acc;
          }
          if (T* gv = pgrad(v)) {
            for (std::size_t k = 0; k < len; ++k) gv[k] += w[j - 1] * g[k];
          }
        }
        break;
      }
      case Op::Sum:
        for (std::size_t p : n.parents) {
          if (T* gp = pgrad(p)) {
            for (std::size_t k = 0; k < len; ++k) gp[k] += g[k];
          }
        }
        break;
      case Op::CrossEntropy:
        if (!n.clamped) {
          if (T* gp = pgrad(n.parents[0])) {
            gp[n.index] += -g[0] / value(Var{n.parents[0]})[n.index];
          }
        }
        break;
      case Op::Bce:
        if (!n.clamped) {
          if (T* gp = pgrad(n.parents[0])) {
            const T q = value(Var{n.parents[0]})[0];
            gp[0] += g[0] * (n.index == 1 ? -T{1} / q : T{1} / (T{1} - q));
          }
        }
        break;
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor<T>*, std::size_t> param_nodes_;
};

}  // namespace arcnet
