#pragma once

// Per-conversation dialogue model. For every active modality m and
// utterance t spoken by q:
//
//   x_t  = attention of the feature over past context states c_1..c_{t-1}
//   s_q  = GRU_s(s_q, m_t ⊕ x_t)          (other speakers untouched)
//   c_t  = GRU_c(c_{t-1}, m_t ⊕ s_q)
//   e_t  = arc(e_{t-1}, s_q, p_shift)      (or a learned GRU without shift)
//
// The per-modality emotion states are fused and classified with a softmax.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "arcnet/cells.hpp"
#include "arcnet/data.hpp"
#include "arcnet/graph.hpp"
#include "arcnet/params.hpp"
#include "arcnet/shift_net.hpp"

namespace arcnet {

struct ModalityMask {
  std::array<bool, 3> on{true, true, true};

  bool active(std::size_t m) const { return on[m]; }
  std::size_t count() const { return static_cast<std::size_t>(on[0]) + on[1] + on[2]; }

  /// Comma separated subset of l, a, v (e.g. "l,a").
  static ModalityMask parse(const std::string& s);
  std::string to_string() const;
  bool operator==(const ModalityMask&) const = default;
};

inline const char* modality_prefix(std::size_t m) {
  static constexpr const char* names[] = {"l", "a", "v"};
  return names[m];
}

struct ModelConfig {
  FeatureDims feature_dims{};
  std::size_t party_dim = 150;
  std::size_t context_dim = 150;
  std::size_t emotion_dim = 100;
  std::size_t n_classes = 2;
  ModalityMask modalities;
  bool use_shift = true;  // arc cell driven by the shift net; false: learned GRU
  bool arc_bias = false;

  /// Pairs (i, j), i < j, of active modalities in l-a, l-v, a-v order.
  std::vector<std::pair<std::size_t, std::size_t>> fusion_pairs() const;
  void validate() const;
};

template <typename T>
struct ModalityParams {
  Tensor<T> attention;     // feature_dim x context_dim
  GruParams<T> party;      // (feature + context) -> party
  GruParams<T> context;    // (feature + party) -> context
  ArcParams<T> arc;        // party -> emotion, shift-gated
  GruParams<T> emotion;    // party -> emotion, learned gates (no-shift mode)
};

template <typename T>
struct FusionParams {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<Tensor<T>> gate_weight;  // emotion x 2*emotion per pair
  std::vector<Tensor<T>> gate_bias;    // emotion per pair
  Tensor<T> projection;                // emotion x (max(#pairs, 1) * emotion)
};

inline std::string pair_name(std::pair<std::size_t, std::size_t> p) {
  return std::string(modality_prefix(p.first)) + modality_prefix(p.second);
}

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::array<ModalityParams<T>, 3> modality;  // inactive modalities stay empty
  FusionParams<T> fusion;
  Tensor<T> classifier;  // emotion x n_classes

  static ModelParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const std::size_t ds = cfg.party_dim, dc = cfg.context_dim, de = cfg.emotion_dim;
    for (std::size_t m = 0; m < 3; ++m) {
      if (!cfg.modalities.active(m)) continue;
      const std::size_t dm = cfg.feature_dims[m];
      auto& mp = p.modality[m];
      mp.attention = Tensor<T>({dm, dc});
      mp.party = GruParams<T>::zeros(dm + dc, ds);
      mp.context = GruParams<T>::zeros(dm + ds, dc);
      if (cfg.use_shift) {
        mp.arc = ArcParams<T>::zeros(ds, de, cfg.arc_bias);
      } else {
        mp.emotion = GruParams<T>::zeros(ds, de);
      }
    }
    p.fusion.pairs = cfg.fusion_pairs();
    for (std::size_t k = 0; k < p.fusion.pairs.size(); ++k) {
      p.fusion.gate_weight.emplace_back(Shape{de, 2 * de});
      p.fusion.gate_bias.emplace_back(Shape{de});
    }
    p.fusion.projection = Tensor<T>({de, std::max<std::size_t>(p.fusion.pairs.size(), 1) * de});
    p.classifier = Tensor<T>({de, cfg.n_classes});
    return p;
  }

  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor, seeded per name.
  static ModelParams random(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = zeros(cfg);
    for (std::size_t m = 0; m < 3; ++m) {
      if (!cfg.modalities.active(m)) continue;
      auto& mp = p.modality[m];
      const std::string pre = modality_prefix(m);
      init_uniform(mp.attention, seed, pre + ".attention", fan_in_bound(mp.attention.cols()));
      mp.party = GruParams<T>::random(mp.party.input_dim, mp.party.hidden_dim, seed, pre + ".party");
      mp.context = GruParams<T>::random(mp.context.input_dim, mp.context.hidden_dim, seed, pre + ".context");
      if (cfg.use_shift) {
        mp.arc = ArcParams<T>::random(cfg.party_dim, cfg.emotion_dim, cfg.arc_bias, seed, pre + ".arc");
      } else {
        mp.emotion = GruParams<T>::random(cfg.party_dim, cfg.emotion_dim, seed, pre + ".emotion");
      }
    }
    for (std::size_t k = 0; k < p.fusion.pairs.size(); ++k) {
      const std::string pre = "fusion.gate_" + pair_name(p.fusion.pairs[k]);
      init_uniform(p.fusion.gate_weight[k], seed, pre + ".W", fan_in_bound(2 * cfg.emotion_dim));
      init_uniform(p.fusion.gate_bias[k], seed, pre + ".b", fan_in_bound(2 * cfg.emotion_dim));
    }
    init_uniform(p.fusion.projection, seed, "fusion.projection", fan_in_bound(p.fusion.projection.cols()));
    init_uniform(p.classifier, seed, "classifier", fan_in_bound(cfg.emotion_dim));
    return p;
  }

  /// Visits every populated tensor with its checkpoint name, in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t m = 0; m < 3; ++m) {
      if (!config.modalities.active(m)) continue;
      auto& mp = modality[m];
      const std::string pre = modality_prefix(m);
      f(pre + ".attention", mp.attention);
      mp.party.for_each(pre + ".party", f);
      mp.context.for_each(pre + ".context", f);
      if (config.use_shift) {
        mp.arc.for_each(pre + ".arc", f);
      } else {
        mp.emotion.for_each(pre + ".emotion", f);
      }
    }
    for (std::size_t k = 0; k < fusion.pairs.size(); ++k) {
      const std::string pre = "fusion.gate_" + pair_name(fusion.pairs[k]);
      f(pre + ".W", fusion.gate_weight[k]);
      f(pre + ".b", fusion.gate_bias[k]);
    }
    f(std::string("fusion.projection"), fusion.projection);
    f(std::string("classifier"), classifier);
  }

  void collect(ParamSet<T>& set) {
    for_each([&](const std::string& name, Tensor<T>& t) { set.add(name, t); });
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for_each([&](const std::string&, Tensor<T>& t) { n += t.size(); });
    return n;
  }
};

// ---- building blocks --------------------------------------------------------

struct Attention {
  Var context;  // x_t
  Var weights;  // alpha; invalid when the history is empty
};

/// alpha = softmax(m^T W_alpha [c_1 .. c_k]), x = sum_j alpha_j c_j.
/// An empty history yields the zero vector.
template <typename T>
Attention attend(Graph<T>& g, const Tensor<T>& w_alpha, Var feature, std::span<const Var> history) {
  if (w_alpha.rank() != 2 || g.size(feature) != w_alpha.rows()) {
    throw ShapeError("attend: feature " + shape_string(g.shape(feature)) + " does not match W_alpha " +
                     shape_string(w_alpha.shape));
  }
  if (history.empty()) return {g.zeros(w_alpha.cols()), Var{}};
  for (Var c : history) {
    if (g.size(c) != w_alpha.cols()) {
      throw ShapeError("attend: context " + shape_string(g.shape(c)) + " does not match W_alpha " +
                       shape_string(w_alpha.shape));
    }
  }
  Var query = g.matvec_t(g.param(w_alpha), feature);
  std::vector<Var> scores;
  scores.reserve(history.size());
  for (Var c : history) scores.push_back(g.dot(query, c));
  Var alpha = g.softmax(g.concat(scores));
  return {g.mix(alpha, history), alpha};
}

/// Gated pairwise fusion: for each active pair (i, j),
/// gate = σ(W_g (e_i ⊕ e_j) + b), f_ij = gate ⊙ e_i + (1 - gate) ⊙ e_j; the pair
/// outputs are concatenated and projected. A single modality is projected
/// directly.
template <typename T>
Var fuse(Graph<T>& g, const FusionParams<T>& fp, const std::array<Var, 3>& emotion) {
  if (fp.pairs.empty()) {
    for (Var e : emotion) {
      if (e.valid()) return g.matvec(g.param(fp.projection), e);
    }
    throw ValidationError("fuse: no active modality");
  }
  std::vector<Var> parts;
  parts.reserve(fp.pairs.size());
  for (std::size_t k = 0; k < fp.pairs.size(); ++k) {
    Var a = emotion[fp.pairs[k].first];
    Var b = emotion[fp.pairs[k].second];
    if (!a.valid() || !b.valid()) throw ValidationError("fuse: pair " + pair_name(fp.pairs[k]) + " is inactive");
    if (g.size(a) != g.size(b)) throw ShapeError("fuse: emotion states differ in length");
    Var gate = g.sigmoid(g.add(g.matvec(g.param(fp.gate_weight[k]), g.concat({a, b})), g.param(fp.gate_bias[k])));
    parts.push_back(g.add(g.mul(gate, a), g.mul(g.affine(gate, T{-1}, T{1}), b)));
  }
  Var joined = parts.size() == 1 ? parts[0] : g.concat(parts);
  return g.matvec(g.param(fp.projection), joined);
}

struct Classification {
  Var logits;
  Var probs;
};

/// o = softmax(W_c^T e).
template <typename T>
Classification classify(Graph<T>& g, const Tensor<T>& w_c, Var e) {
  Var logits = g.matvec_t(g.param(w_c), e);
  return {logits, g.softmax(logits)};
}

// ---- value-level wrappers ---------------------------------------------------

template <typename T>
std::pair<std::vector<T>, std::vector<T>> attend(const Tensor<T>& w_alpha, std::span<const T> feature,
                                                 const std::vector<std::vector<T>>& history) {
  Graph<T> g;
  std::vector<Var> h;
  for (const auto& c : history) h.push_back(g.constant(std::span<const T>(c)));
  Attention a = attend(g, w_alpha, g.constant(feature), h);
  return {g.to_vector(a.context), a.weights.valid() ? g.to_vector(a.weights) : std::vector<T>{}};
}

template <typename T>
std::vector<T> fuse(const FusionParams<T>& fp, const std::array<std::vector<T>, 3>& emotion) {
  Graph<T> g;
  std::array<Var, 3> vars;
  for (std::size_t m = 0; m < 3; ++m) {
    if (!emotion[m].empty()) vars[m] = g.constant(std::span<const T>(emotion[m]));
  }
  return g.to_vector(fuse(g, fp, vars));
}

template <typename T>
std::vector<T> classify(const Tensor<T>& w_c, std::span<const T> e) {
  Graph<T> g;
  return g.to_vector(classify(g, w_c, g.constant(e)).probs);
}

// ---- dialogue state ---------------------------------------------------------

/// Plain-value snapshot of everything carried between utterances.
template <typename T>
struct DialogueState {
  std::map<std::string, std::array<std::vector<T>, 3>> party;  // speaker -> per-modality state
  std::array<std::vector<std::vector<T>>, 3> context_history;
  std::array<std::vector<T>, 3> emotion;  // empty before the first utterance
  std::size_t steps = 0;
};

/// Builds the expression graph of a conversation one utterance at a time.
template <typename T>
class DialogueGraph {
 public:
  struct Step {
    Var logits;
    Var probs;
    Var fused;
    std::array<Var, 3> emotion;
    std::array<Attention, 3> attention;
    /// 1 - p_shift with the shift net; mean reset-gate activation without.
    double gate = 0.0;
  };

  DialogueGraph(Graph<T>& g, const ModelParams<T>& params) : g_(g), p_(params) {
    const auto& cfg = p_.config;
    zero_party_ = g_.zeros(cfg.party_dim);
    zero_context_ = g_.zeros(cfg.context_dim);
    zero_emotion_ = g_.zeros(cfg.emotion_dim);
  }

  DialogueGraph(Graph<T>& g, const ModelParams<T>& params, const DialogueState<T>& initial)
      : DialogueGraph(g, params) {
    for (const auto& [speaker, states] : initial.party) {
      for (std::size_t m = 0; m < 3; ++m) {
        if (p_.config.modalities.active(m) && !states[m].empty()) {
          party_[speaker][m] = g_.constant(std::span<const T>(states[m]));
        }
      }
    }
    for (std::size_t m = 0; m < 3; ++m) {
      if (!p_.config.modalities.active(m)) continue;
      for (const auto& c : initial.context_history[m]) history_[m].push_back(g_.constant(std::span<const T>(c)));
      if (!initial.emotion[m].empty()) emotion_[m] = g_.constant(std::span<const T>(initial.emotion[m]));
    }
    steps_ = initial.steps;
  }

  Step step(const Utterance& u, Var p_shift) {
    const auto& cfg = p_.config;
    for (std::size_t m = 0; m < 3; ++m) {
      if (cfg.modalities.active(m) && u.features[m].size() != cfg.feature_dims[m]) {
        throw ShapeError("utterance '" + u.utterance_id + "': modality " + modality_prefix(m) + " has " +
                         std::to_string(u.features[m].size()) + " features, model expects " +
                         std::to_string(cfg.feature_dims[m]));
      }
    }
    Step out;
    double reset_mean = 0.0;
    auto& speaker_states = party_[u.speaker];
    for (std::size_t m = 0; m < 3; ++m) {
      if (!cfg.modalities.active(m)) continue;
      const auto& mp = p_.modality[m];
      Var feature = g_.constant(u.features[m]);
      out.attention[m] = attend(g_, mp.attention, feature, history_[m]);

      Var s_prev = speaker_states[m].valid() ? speaker_states[m] : zero_party_;
      Var s = gru_step(g_, mp.party, s_prev, g_.concat({feature, out.attention[m].context})).h;
      Var c_prev = history_[m].empty() ? zero_context_ : history_[m].back();
      Var c = gru_step(g_, mp.context, c_prev, g_.concat({feature, s})).h;
      speaker_states[m] = s;
      history_[m].push_back(c);

      Var e_prev = emotion_[m].valid() ? emotion_[m] : zero_emotion_;
      if (cfg.use_shift) {
        emotion_[m] = arc_step(g_, mp.arc, e_prev, s, p_shift).e;
      } else {
        GruStep st = gru_step(g_, mp.emotion, e_prev, s);
        emotion_[m] = st.h;
        double acc = 0.0;
        for (T r : g_.value(st.reset)) acc += static_cast<double>(r);
        reset_mean += acc / static_cast<double>(g_.size(st.reset));
      }
      out.emotion[m] = emotion_[m];
    }
    out.gate = cfg.use_shift ? 1.0 - static_cast<double>(g_.item(p_shift))
                             : reset_mean / static_cast<double>(cfg.modalities.count());
    out.fused = fuse(g_, p_.fusion, out.emotion);
    Classification cls = classify(g_, p_.classifier, out.fused);
    out.logits = cls.logits;
    out.probs = cls.probs;
    ++steps_;
    return out;
  }

  DialogueState<T> state() const {
    DialogueState<T> s;
    for (const auto& [speaker, vars] : party_) {
      auto& dst = s.party[speaker];
      for (std::size_t m = 0; m < 3; ++m) {
        if (vars[m].valid()) dst[m] = g_.to_vector(vars[m]);
      }
    }
    for (std::size_t m = 0; m < 3; ++m) {
      for (Var c : history_[m]) s.context_history[m].push_back(g_.to_vector(c));
      if (emotion_[m].valid()) s.emotion[m] = g_.to_vector(emotion_[m]);
    }
    s.steps = steps_;
    return s;
  }

 private:
  Graph<T>& g_;
  const ModelParams<T>& p_;
  Var zero_party_, zero_context_, zero_emotion_;
  std::map<std::string, std::array<Var, 3>> party_;
  std::array<std::vector<Var>, 3> history_;
  std::array<Var, 3> emotion_;
  std::size_t steps_ = 0;
};

template <typename T>
struct StepResult {
  DialogueState<T> state;
  std::vector<T> logits;
  std::vector<T> probs;
  double gate = 0.0;
};

/// One utterance through the model starting from `state`. `p_shift` is
/// ignored when the model runs without the shift net.
template <typename T>
StepResult<T> step_utterance(const ModelParams<T>& params, const DialogueState<T>& state, const Utterance& u,
                             T p_shift) {
  Graph<T> g;
  DialogueGraph<T> dg(g, params, state);
  auto st = dg.step(u, g.scalar(p_shift));
  return {dg.state(), g.to_vector(st.logits), g.to_vector(st.probs), st.gate};
}

// ---- whole conversations ----------------------------------------------------

struct ForwardOptions {
  /// Let classification gradients reach the shift net through the gate.
  bool gate_gradient = false;
  /// When non-empty, entry t replaces p_shift at utterance t.
  std::vector<double> injected_shift;
};

template <typename T>
struct ConversationGraph {
  std::vector<Var> probs;
  /// Shift-net outputs for t >= 1 (invalid at t = 0 or when no net is used).
  std::vector<Var> shift;
  /// Gate input with the shift net; 1 - mean reset gate without it.
  std::vector<double> p_shift;
  std::vector<double> gate;
  std::vector<std::array<Var, 3>> emotion;
};

/// Unrolls a conversation. With the shift net, p_shift at the first
/// utterance is 1 and at later ones comes from the pair (t-1, t).
template <typename T>
ConversationGraph<T> build_conversation(Graph<T>& g, const ModelParams<T>& params, const ShiftNetParams<T>* shift,
                                        const Conversation& conv, const ForwardOptions& opt = {}) {
  if (conv.utterances.empty()) throw ValidationError("conversation '" + conv.id + "' is empty");
  const bool use_shift = params.config.use_shift;
  const bool injected = !opt.injected_shift.empty();
  if (injected && opt.injected_shift.size() != conv.utterances.size()) {
    throw ValidationError("injected p_shift length does not match conversation length");
  }
  if (use_shift && !injected && shift == nullptr) {
    throw ValidationError("model uses the shift component but no shift net was supplied");
  }
  ConversationGraph<T> out;
  DialogueGraph<T> dg(g, params);
  std::vector<double> prev_features;
  for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
    const Utterance& u = conv.utterances[t];
    Var net_shift;
    if (shift != nullptr && t > 0) {
      std::vector<double> cur = shift_features(u, shift->config.input);
      net_shift = shift_probability(g, *shift, g.constant(prev_features), g.constant(cur)).shift;
    }
    if (shift != nullptr) prev_features = shift_features(u, shift->config.input);

    Var gate_input;
    if (injected) {
      gate_input = g.scalar(static_cast<T>(opt.injected_shift[t]));
    } else if (!use_shift) {
      gate_input = g.scalar(T{1});
    } else if (t == 0) {
      gate_input = g.scalar(T{1});
    } else {
      gate_input = opt.gate_gradient ? net_shift : g.detach(net_shift);
    }
    auto st = dg.step(u, gate_input);
    out.probs.push_back(st.probs);
    out.shift.push_back(net_shift);
    out.p_shift.push_back(use_shift ? static_cast<double>(g.item(gate_input)) : 1.0 - st.gate);
    out.gate.push_back(st.gate);
    out.emotion.push_back(st.emotion);
  }
  return out;
}

struct ConversationOutput {
  std::vector<std::vector<double>> probs;
  std::vector<double> p_shift;
  std::vector<double> gate;
  std::vector<std::array<std::vector<double>, 3>> emotion;
};

template <typename T>
ConversationOutput forward_conversation(const ModelParams<T>& params, const ShiftNetParams<T>* shift,
                                        const Conversation& conv, const ForwardOptions& opt = {}) {
  Graph<T> g;
  auto cg = build_conversation(g, params, shift, conv, opt);
  ConversationOutput out;
  for (std::size_t t = 0; t < cg.probs.size(); ++t) {
    auto p = g.value(cg.probs[t]);
    out.probs.emplace_back(p.begin(), p.end());
    std::array<std::vector<double>, 3> e;
    for (std::size_t m = 0; m < 3; ++m) {
      if (cg.emotion[t][m].valid()) {
        auto v = g.value(cg.emotion[t][m]);
        e[m].assign(v.begin(), v.end());
      }
    }
    out.emotion.push_back(std::move(e));
  }
  out.p_shift = std::move(cg.p_shift);
  out.gate = std::move(cg.gate);
  return out;
}

}  // namespace arcnet
