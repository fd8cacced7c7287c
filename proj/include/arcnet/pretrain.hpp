#pragma once

// Standalone training of the shift network on consecutive-utterance pairs.

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "arcnet/data.hpp"
#include "arcnet/metrics.hpp"
#include "arcnet/optim.hpp"
#include "arcnet/shift_net.hpp"

namespace arcnet {

struct ShiftPair {
  std::vector<double> prev;
  std::vector<double> cur;
  int label = 0;  // 1 = shift
};

std::vector<ShiftPair> collect_shift_pairs(const Corpus& c, const LabelView& view, ShiftInput input);

struct PretrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 5;
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  AdamConfig adam;
};

struct ShiftEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;  // F1 of the shift class
};

struct ShiftReport {
  MetricsReport metrics;  // classes: 0 = inertia, 1 = shift
  double accuracy = 0.0;
  double f1 = 0.0;
  std::size_t best_epoch = 0;
  std::size_t train_pairs = 0;
  std::size_t val_pairs = 0;
  std::vector<ShiftEpoch> history;
};

std::string shift_report_to_json(const ShiftReport& r, int indent = 2);

/// Thresholds p_shift at 0.5.
template <typename T>
ShiftReport evaluate_shift(const ShiftNetParams<T>& p, std::span<const ShiftPair> pairs) {
  if (pairs.empty()) throw ValidationError("evaluate_shift: no pairs");
  std::vector<int> truth, pred;
  truth.reserve(pairs.size());
  pred.reserve(pairs.size());
  for (const auto& pr : pairs) {
    const T ps = shift_probability<T, double>(p, pr.prev, pr.cur);
    truth.push_back(pr.label);
    pred.push_back(ps >= T{0.5} ? 1 : 0);
  }
  ShiftReport r;
  r.metrics = compute_metrics(truth, pred, 2);
  r.metrics.class_names = {"inertia", "shift"};
  r.accuracy = r.metrics.accuracy;
  r.f1 = r.metrics.per_class[1].f1;
  return r;
}

template <typename T>
struct PretrainResult {
  ShiftNetParams<T> params;
  ShiftReport report;
};

/// Minibatch BCE training with validation after every epoch; returns the
/// parameters of the epoch with the best validation shift F1.
template <typename T>
PretrainResult<T> pretrain(ShiftNetParams<T> params, const Corpus& corpus, const LabelView& view,
                           const PretrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ValidationError("pretrain: batch size must be positive");
  if (corpus.pair_count() == 0) throw ValidationError("pretrain: corpus has no consecutive utterance pairs");
  const ShiftInput input = params.config.input;

  std::vector<ShiftPair> train_pairs, val_pairs;
  if (corpus.conversations.size() >= 2) {
    auto [train_c, val_c] = split_train_val(corpus, cfg.train_fraction, cfg.seed);
    train_pairs = collect_shift_pairs(train_c, view, input);
    val_pairs = collect_shift_pairs(val_c, view, input);
  } else {
    train_pairs = collect_shift_pairs(corpus, view, input);
  }
  if (train_pairs.empty()) throw ValidationError("pretrain: training split has no utterance pairs");
  const std::vector<ShiftPair>& monitor = val_pairs.empty() ? train_pairs : val_pairs;

  ParamSet<T> set;
  params.collect(set);
  Adam<T> opt(set, cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  PretrainResult<T> best{params, {}};
  double best_f1 = -1.0;
  std::vector<ShiftEpoch> history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Graph<T> g;
      std::vector<Var> terms;
      for (std::size_t i = start; i < end; ++i) {
        const ShiftPair& pr = train_pairs[order[i]];
        auto sp = shift_probability(g, params, g.constant(pr.prev), g.constant(pr.cur));
        terms.push_back(g.bce(sp.shift, pr.label));
      }
      Var loss = g.scale(g.sum(terms), T{1} / static_cast<T>(end - start));
      g.backward(loss);
      set.zero_grad();
      set.accumulate(g);
      opt.step();
      loss_sum += static_cast<double>(g.item(loss));
      ++batches;
    }
    ShiftReport r = evaluate_shift(params, monitor);
    history.push_back({epoch, loss_sum / static_cast<double>(batches), r.accuracy, r.f1});
    if (r.f1 > best_f1) {
      best_f1 = r.f1;
      best.params = params;
      best.report = r;
      best.report.best_epoch = epoch;
    }
  }
  best.report.history = std::move(history);
  best.report.train_pairs = train_pairs.size();
  best.report.val_pairs = val_pairs.size();
  return best;
}

}  // namespace arcnet
