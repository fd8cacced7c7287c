#pragma once

// Recurrent cells: the conventional GRU used for party and context states,
// and the arc cell whose reset and update gating is driven by an externally
// supplied shift probability instead of learned gates.

#include <string>
#include <vector>

#include "arcnet/graph.hpp"
#include "arcnet/params.hpp"

namespace arcnet {

template <typename T>
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor<T> W_z, U_z, b_z;  // update gate
  Tensor<T> W_r, U_r, b_r;  // reset gate
  Tensor<T> W_h, U_h, b_h;  // candidate

  static GruParams zeros(std::size_t d_in, std::size_t d_h) {
    GruParams p;
    p.input_dim = d_in;
    p.hidden_dim = d_h;
    for (auto* w : {&p.W_z, &p.W_r, &p.W_h}) *w = Tensor<T>({d_h, d_in});
    for (auto* u : {&p.U_z, &p.U_r, &p.U_h}) *u = Tensor<T>({d_h, d_h});
    for (auto* b : {&p.b_z, &p.b_r, &p.b_h}) *b = Tensor<T>({d_h});
    return p;
  }

  static GruParams random(std::size_t d_in, std::size_t d_h, std::uint64_t seed,
                          const std::string& prefix) {
    GruParams p = zeros(d_in, d_h);
    p.for_each(prefix, [&](const std::string& name, Tensor<T>& t) {
      const std::size_t fan_in = t.rank() == 2 ? t.cols() : d_in;
      init_uniform(t, seed, name, fan_in_bound(fan_in));
    });
    return p;
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    f(prefix + ".W_z", W_z);
    f(prefix + ".U_z", U_z);
    f(prefix + ".b_z", b_z);
    f(prefix + ".W_r", W_r);
    f(prefix + ".U_r", U_r);
    f(prefix + ".b_r", b_r);
    f(prefix + ".W_h", W_h);
    f(prefix + ".U_h", U_h);
    f(prefix + ".b_h", b_h);
  }

  void collect(ParamSet<T>& set, const std::string& prefix) {
    for_each(prefix, [&](const std::string& name, Tensor<T>& t) { set.add(name, t); });
  }
};

/// Shift-gated cell parameters: W maps the party state, U the previous
/// emotion state. The bias is empty unless enabled.
template <typename T>
struct ArcParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor<T> W, U, b;

  bool has_bias() const { return !b.empty(); }

  static ArcParams zeros(std::size_t d_s, std::size_t d_e, bool with_bias = false) {
    ArcParams p;
    p.input_dim = d_s;
    p.hidden_dim = d_e;
    p.W = Tensor<T>({d_e, d_s});
    p.U = Tensor<T>({d_e, d_e});
    if (with_bias) p.b = Tensor<T>({d_e});
    return p;
  }

  static ArcParams random(std::size_t d_s, std::size_t d_e, bool with_bias, std::uint64_t seed,
                          const std::string& prefix) {
    ArcParams p = zeros(d_s, d_e, with_bias);
    init_uniform(p.W, seed, prefix + ".W", fan_in_bound(d_s));
    init_uniform(p.U, seed, prefix + ".U", fan_in_bound(d_e));
    if (with_bias) init_uniform(p.b, seed, prefix + ".b", fan_in_bound(d_s));
    return p;
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    f(prefix + ".W", W);
    f(prefix + ".U", U);
    if (has_bias()) f(prefix + ".b", b);
  }

  void collect(ParamSet<T>& set, const std::string& prefix) {
    for_each(prefix, [&](const std::string& name, Tensor<T>& t) { set.add(name, t); });
  }
};

struct GruStep {
  Var h;
  Var update;
  Var reset;
};

/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 - z) ⊙ h + z ⊙ h̃.
template <typename T>
GruStep gru_step(Graph<T>& g, const GruParams<T>& p, Var h_prev, Var x) {
  if (g.size(x) != p.input_dim || g.size(h_prev) != p.hidden_dim) {
    throw ShapeError("gru_step: expected x of length " + std::to_string(p.input_dim) +
                     " and h of length " + std::to_string(p.hidden_dim) + ", got " +
                     shape_string(g.shape(x)) + " and " + shape_string(g.shape(h_prev)));
  }
  auto gate = [&](const Tensor<T>& w, const Tensor<T>& u, const Tensor<T>& b, Var h) {
    return g.add(g.add(g.matvec(g.param(w), x), g.matvec(g.param(u), h)), g.param(b));
  };
  Var z = g.sigmoid(gate(p.W_z, p.U_z, p.b_z, h_prev));
  Var r = g.sigmoid(gate(p.W_r, p.U_r, p.b_r, h_prev));
  Var cand = g.tanh(gate(p.W_h, p.U_h, p.b_h, g.mul(r, h_prev)));
  // (1 - z) ⊙ h + z ⊙ h̃
  Var keep = g.mul(g.affine(z, T{-1}, T{1}), h_prev);
  Var h = g.add(keep, g.mul(z, cand));
  return {h, z, r};
}

template <typename T>
std::vector<T> gru_step(const GruParams<T>& p, std::span<const T> h_prev, std::span<const T> x) {
  Graph<T> g;
  return g.to_vector(gru_step(g, p, g.constant(h_prev), g.constant(x)).h);
}

struct ArcStep {
  Var e;
  Var candidate;
};

/// ẽ = tanh(W s + (1 - p) ⊙ (U e_prev)), e = (1 - p) ⊙ e_prev + p ⊙ ẽ.
/// `p_shift` is a scalar node whose value must lie in [0, 1].
template <typename T>
ArcStep arc_step(Graph<T>& g, const ArcParams<T>& p, Var e_prev, Var s, Var p_shift) {
  if (g.size(p_shift) != 1) throw ShapeError("arc_step: p_shift must be a scalar");
  const T ps = g.item(p_shift);
  if (!(ps >= T{0} && ps <= T{1})) {
    throw ValidationError("arc_step: p_shift " + std::to_string(static_cast<double>(ps)) +
                          " outside [0, 1]");
  }
  if (g.size(s) != p.input_dim || g.size(e_prev) != p.hidden_dim) {
    throw ShapeError("arc_step: expected s of length " + std::to_string(p.input_dim) +
                     " and e of length " + std::to_string(p.hidden_dim) + ", got " +
                     shape_string(g.shape(s)) + " and " + shape_string(g.shape(e_prev)));
  }
  Var inertia = g.affine(p_shift, T{-1}, T{1});
  Var pre = g.add(g.matvec(g.param(p.W), s), g.scalar_mul(inertia, g.matvec(g.param(p.U), e_prev)));
  if (p.has_bias()) pre = g.add(pre, g.param(p.b));
  Var cand = g.tanh(pre);
  Var e = g.add(g.scalar_mul(inertia, e_prev), g.scalar_mul(p_shift, cand));
  return {e, cand};
}

template <typename T>
std::vector<T> arc_step(const ArcParams<T>& p, std::span<const T> e_prev, std::span<const T> s,
                        T p_shift) {
  Graph<T> g;
  return g.to_vector(arc_step(g, p, g.constant(e_prev), g.constant(s), g.scalar(p_shift)).e);
}

}  // namespace arcnet
