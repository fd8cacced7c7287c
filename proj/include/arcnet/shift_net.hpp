#pragma once

// Siamese emotion-shift network. Both utterances go through the same input
// layout (previous ⊕ current ⊕ |current - previous|), a tanh hidden layer and
// a sigmoid unit giving the probability of emotional inertia; the shift
// probability is its complement.

#include <string>
#include <vector>

#include "arcnet/data.hpp"
#include "arcnet/graph.hpp"
#include "arcnet/params.hpp"

namespace arcnet {

enum class ShiftInput { Text, Trimodal };

ShiftInput parse_shift_input(const std::string& s);
std::string to_string(ShiftInput s);

struct ShiftNetConfig {
  std::size_t feature_dim = 0;  // per-utterance input length
  std::size_t hidden_dim = 300;
  ShiftInput input = ShiftInput::Text;
  /// Identity hidden activation. With hidden_dim == 1 the net is a single
  /// linear score over the 3 * feature_dim input.
  bool linear = false;
};

/// Feature length the shift net sees for a corpus with the given dims.
inline std::size_t shift_feature_dim(const FeatureDims& dims, ShiftInput input) {
  return input == ShiftInput::Text ? dims[0] : dims[0] + dims[1] + dims[2];
}

/// Per-utterance shift-net input: text features, or text ⊕ audio ⊕ video.
std::vector<double> shift_features(const Utterance& u, ShiftInput input);

template <typename T>
struct ShiftNetParams {
  ShiftNetConfig config;
  Tensor<T> W1;  // hidden x 3*feature_dim
  Tensor<T> b1;  // hidden
  Tensor<T> w2;  // hidden
  Tensor<T> b2;  // 1

  static ShiftNetParams zeros(const ShiftNetConfig& cfg) {
    if (cfg.feature_dim == 0 || cfg.hidden_dim == 0) {
      throw ValidationError("shift net: feature and hidden dims must be positive");
    }
    ShiftNetParams p;
    p.config = cfg;
    p.W1 = Tensor<T>({cfg.hidden_dim, 3 * cfg.feature_dim});
    p.b1 = Tensor<T>({cfg.hidden_dim});
    p.w2 = Tensor<T>({cfg.hidden_dim});
    p.b2 = Tensor<T>({1});
    return p;
  }

  static ShiftNetParams random(const ShiftNetConfig& cfg, std::uint64_t seed) {
    ShiftNetParams p = zeros(cfg);
    const double in_bound = fan_in_bound(3 * cfg.feature_dim);
    const double out_bound = fan_in_bound(cfg.hidden_dim);
    init_uniform(p.W1, seed, "shift.W1", in_bound);
    init_uniform(p.b1, seed, "shift.b1", in_bound);
    init_uniform(p.w2, seed, "shift.w2", out_bound);
    init_uniform(p.b2, seed, "shift.b2", out_bound);
    return p;
  }

  template <typename F>
  void for_each(F&& f) {
    f("shift.W1", W1);
    f("shift.b1", b1);
    f("shift.w2", w2);
    f("shift.b2", b2);
  }

  void collect(ParamSet<T>& set) {
    for_each([&](const std::string& name, Tensor<T>& t) { set.add(name, t); });
  }
};

struct ShiftProbability {
  Var shift;
  Var inertia;
};

template <typename T>
ShiftProbability shift_probability(Graph<T>& g, const ShiftNetParams<T>& p, Var prev, Var cur) {
  const std::size_t d = p.config.feature_dim;
  if (g.size(prev) != d || g.size(cur) != d) {
    throw ShapeError("shift_probability: expected feature vectors of length " + std::to_string(d) +
                     ", got " + shape_string(g.shape(prev)) + " and " + shape_string(g.shape(cur)));
  }
  Var z = g.concat({prev, cur, g.abs_diff(cur, prev)});
  Var pre = g.add(g.matvec(g.param(p.W1), z), g.param(p.b1));
  Var hidden = p.config.linear ? pre : g.tanh(pre);
  Var score = g.add(g.dot(g.param(p.w2), hidden), g.param(p.b2));
  Var inertia = g.sigmoid(score);
  Var shift = g.affine(inertia, T{-1}, T{1});
  return {shift, inertia};
}

/// Value-level shift probability for a pair of feature vectors.
template <typename T, typename U>
T shift_probability(const ShiftNetParams<T>& p, std::span<const U> prev, std::span<const U> cur) {
  Graph<T> g;
  return g.item(shift_probability(g, p, g.constant(prev), g.constant(cur)).shift);
}

}  // namespace arcnet
