#pragma once

// Plain-loop reference computations used as test oracles. Nothing in here
// goes through the graph engine.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "arcnet/model.hpp"
#include "arcnet/shift_net.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename T>
double w(const arcnet::Tensor<T>& t, std::size_t r, std::size_t c) {
  return static_cast<double>(t.data[r * t.shape[1] + c]);
}

template <typename T>
Vec matvec(const arcnet::Tensor<T>& m, const Vec& x) {
  Vec y(m.shape[0], 0.0);
  for (std::size_t r = 0; r < m.shape[0]; ++r) {
    for (std::size_t c = 0; c < m.shape[1]; ++c) y[r] += w(m, r, c) * x[c];
  }
  return y;
}

template <typename T>
Vec matvec_t(const arcnet::Tensor<T>& m, const Vec& x) {
  Vec y(m.shape[1], 0.0);
  for (std::size_t r = 0; r < m.shape[0]; ++r) {
    for (std::size_t c = 0; c < m.shape[1]; ++c) y[c] += w(m, r, c) * x[r];
  }
  return y;
}

template <typename T>
Vec values(const arcnet::Tensor<T>& t) {
  return Vec(t.data.begin(), t.data.end());
}

inline Vec cat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline Vec softmax(const Vec& x) {
  double mx = *std::max_element(x.begin(), x.end());
  Vec out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (out[i] = std::exp(x[i] - mx));
  for (auto& v : out) v /= z;
  return out;
}

template <typename T>
Vec gru(const arcnet::GruParams<T>& p, const Vec& h, const Vec& x) {
  const std::size_t n = p.hidden_dim;
  Vec out(n);
  Vec r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = static_cast<double>(p.b_r.data[i]);
    for (std::size_t j = 0; j < x.size(); ++j) a += w(p.W_r, i, j) * x[j];
    for (std::size_t j = 0; j < n; ++j) a += w(p.U_r, i, j) * h[j];
    r[i] = sigmoid(a);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double az = static_cast<double>(p.b_z.data[i]);
    double ah = static_cast<double>(p.b_h.data[i]);
    for (std::size_t j = 0; j < x.size(); ++j) {
      az += w(p.W_z, i, j) * x[j];
      ah += w(p.W_h, i, j) * x[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      az += w(p.U_z, i, j) * h[j];
      ah += w(p.U_h, i, j) * r[j] * h[j];
    }
    const double z = sigmoid(az);
    out[i] = (1.0 - z) * h[i] + z * std::tanh(ah);
  }
  return out;
}

/// Mean reset-gate activation of a GRU step.
template <typename T>
double gru_reset_mean(const arcnet::GruParams<T>& p, const Vec& h, const Vec& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.hidden_dim; ++i) {
    double a = static_cast<double>(p.b_r.data[i]);
    for (std::size_t j = 0; j < x.size(); ++j) a += w(p.W_r, i, j) * x[j];
    for (std::size_t j = 0; j < p.hidden_dim; ++j) a += w(p.U_r, i, j) * h[j];
    acc += sigmoid(a);
  }
  return acc / static_cast<double>(p.hidden_dim);
}

template <typename T>
Vec arc(const arcnet::ArcParams<T>& p, const Vec& e_prev, const Vec& s, double ps) {
  Vec out(p.hidden_dim);
  for (std::size_t i = 0; i < p.hidden_dim; ++i) {
    double ws = p.has_bias() ? static_cast<double>(p.b.data[i]) : 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) ws += w(p.W, i, j) * s[j];
    double ue = 0.0;
    for (std::size_t j = 0; j < e_prev.size(); ++j) ue += w(p.U, i, j) * e_prev[j];
    const double cand = std::tanh(ws + (1.0 - ps) * ue);
    out[i] = (1.0 - ps) * e_prev[i] + ps * cand;
  }
  return out;
}

template <typename T>
double shift_prob(const arcnet::ShiftNetParams<T>& p, const Vec& prev, const Vec& cur) {
  Vec z = prev;
  z.insert(z.end(), cur.begin(), cur.end());
  for (std::size_t i = 0; i < prev.size(); ++i) z.push_back(std::fabs(cur[i] - prev[i]));
  double score = static_cast<double>(p.b2.data[0]);
  for (std::size_t h = 0; h < p.config.hidden_dim; ++h) {
    double a = static_cast<double>(p.b1.data[h]);
    for (std::size_t j = 0; j < z.size(); ++j) a += w(p.W1, h, j) * z[j];
    score += static_cast<double>(p.w2.data[h]) * (p.config.linear ? a : std::tanh(a));
  }
  return 1.0 - sigmoid(score);
}

template <typename T>
Vec attention(const arcnet::Tensor<T>& w_alpha, const Vec& m, const std::vector<Vec>& history) {
  if (history.empty()) return Vec(w_alpha.shape[1], 0.0);
  Vec q = matvec_t(w_alpha, m);
  Vec scores;
  for (const auto& c : history) {
    double d = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) d += q[i] * c[i];
    scores.push_back(d);
  }
  Vec alpha = softmax(scores);
  Vec x(q.size(), 0.0);
  for (std::size_t j = 0; j < history.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha[j] * history[j][i];
  }
  return x;
}

template <typename T>
Vec fusion(const arcnet::FusionParams<T>& fp, const std::array<Vec, 3>& e) {
  if (fp.pairs.empty()) {
    for (const auto& v : e) {
      if (!v.empty()) return matvec(fp.projection, v);
    }
  }
  Vec joined;
  for (std::size_t k = 0; k < fp.pairs.size(); ++k) {
    const Vec& a = e[fp.pairs[k].first];
    const Vec& b = e[fp.pairs[k].second];
    Vec pre = matvec(fp.gate_weight[k], cat(a, b));
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double g = sigmoid(pre[i] + static_cast<double>(fp.gate_bias[k].data[i]));
      joined.push_back(g * a[i] + (1.0 - g) * b[i]);
    }
  }
  return matvec(fp.projection, joined);
}

struct Trace {
  std::vector<Vec> logits;
  std::vector<Vec> probs;
  std::vector<double> p_shift;
  std::vector<double> gate;
};

/// Whole-conversation forward pass written out step by step.
template <typename T>
Trace conversation(const arcnet::ModelParams<T>& p, const arcnet::ShiftNetParams<T>* net,
                   const arcnet::Conversation& conv) {
  const auto& cfg = p.config;
  Trace tr;
  std::map<std::string, std::array<Vec, 3>> party;
  std::array<std::vector<Vec>, 3> history;
  std::array<Vec, 3> emotion;
  for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
    const auto& u = conv.utterances[t];
    double ps = 1.0;
    if (cfg.use_shift && t > 0) {
      ps = shift_prob(*net, arcnet::shift_features(conv.utterances[t - 1], net->config.input),
                      arcnet::shift_features(u, net->config.input));
    }
    double reset = 0.0;
    std::array<Vec, 3> e_now;
    for (std::size_t m = 0; m < 3; ++m) {
      if (!cfg.modalities.active(m)) continue;
      const auto& mp = p.modality[m];
      const Vec& f = u.features[m];
      Vec x = attention(mp.attention, f, history[m]);
      Vec s_prev = party[u.speaker][m].empty() ? Vec(cfg.party_dim, 0.0) : party[u.speaker][m];
      Vec s = gru(mp.party, s_prev, cat(f, x));
      Vec c_prev = history[m].empty() ? Vec(cfg.context_dim, 0.0) : history[m].back();
      Vec c = gru(mp.context, c_prev, cat(f, s));
      party[u.speaker][m] = s;
      history[m].push_back(c);
      Vec e_prev = emotion[m].empty() ? Vec(cfg.emotion_dim, 0.0) : emotion[m];
      if (cfg.use_shift) {
        emotion[m] = arc(mp.arc, e_prev, s, ps);
      } else {
        reset += gru_reset_mean(mp.emotion, e_prev, s);
        emotion[m] = gru(mp.emotion, e_prev, s);
      }
      e_now[m] = emotion[m];
    }
    Vec logits = matvec_t(p.classifier, fusion(p.fusion, e_now));
    tr.logits.push_back(logits);
    tr.probs.push_back(softmax(logits));
    const double gate = cfg.use_shift ? 1.0 - ps : reset / static_cast<double>(cfg.modalities.count());
    tr.gate.push_back(gate);
    tr.p_shift.push_back(cfg.use_shift ? ps : 1.0 - gate);
  }
  return tr;
}

/// Shift flags written as the literal "pos next to neg" rule.
inline std::vector<int> shift_flags(const std::vector<arcnet::Polarity>& seq) {
  std::vector<int> out;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const bool a_pos = seq[i - 1] == arcnet::Polarity::Positive;
    const bool a_neg = seq[i - 1] == arcnet::Polarity::Negative;
    const bool b_pos = seq[i] == arcnet::Polarity::Positive;
    const bool b_neg = seq[i] == arcnet::Polarity::Negative;
    out.push_back(((a_pos && b_neg) || (a_neg && b_pos)) ? 1 : 0);
  }
  return out;
}

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;
  std::vector<std::size_t> support;
  double weighted_f1 = 0.0;
};

/// Counts by scanning the label lists once per class.
inline Metrics metrics(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
  Metrics m;
  const std::size_t n = truth.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += truth[i] == pred[i];
  m.accuracy = static_cast<double>(hits) / static_cast<double>(n);
  for (int c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] == c && truth[i] == c) tp += 1;
      if (pred[i] == c && truth[i] != c) fp += 1;
      if (pred[i] != c && truth[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(f);
    m.support.push_back(static_cast<std::size_t>(tp + fn));
    m.weighted_f1 += f * (tp + fn) / static_cast<double>(n);
  }
  return m;
}

/// Adam reference for a scalar parameter with decoupled decay.
struct ScalarAdam {
  double lr, wd, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * (mh / (std::sqrt(vh) + eps) + wd * theta);
  }
};

}  // namespace oracle
