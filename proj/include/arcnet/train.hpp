#pragma once

// Joint training of the dialogue model (and optionally the shift net) and
// evaluation on a corpus.

#include <algorithm>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "arcnet/data.hpp"
#include "arcnet/metrics.hpp"
#include "arcnet/model.hpp"
#include "arcnet/optim.hpp"
#include "arcnet/shift_net.hpp"

namespace arcnet {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> train_accuracy;
  double val_weighted_f1 = 0.0;
  double val_accuracy = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 128;  // conversations per update
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  /// Weight of the shift BCE term in the joint loss.
  double lambda = 1.0;
  bool freeze_shift = false;
  bool gate_gradient = false;
  AdamConfig adam;
  /// Conversations whose gradients are computed concurrently.
  std::size_t threads = 1;
  bool eval_train = false;
  /// Called after each epoch; returning false stops training.
  std::function<bool(const EpochRecord&)> on_epoch;
};

template <typename T>
struct TrainResult {
  ModelParams<T> model;                  // best epoch by validation weighted F1
  std::optional<ShiftNetParams<T>> shift;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_weighted_f1 = 0.0;
  AdamState<T> optimizer;  // state after the best epoch
};

/// Loss of one conversation: sum_t CE(o_t, y_t) + lambda * sum_{t>=1} BCE(p_t, shift label).
template <typename T>
Var conversation_loss(Graph<T>& g, const ModelParams<T>& model, const ShiftNetParams<T>* shift,
                      const Corpus& corpus, const Conversation& conv, const LabelView& view, double lambda,
                      bool shift_loss, const ForwardOptions& opt = {}) {
  auto cg = build_conversation(g, model, shift, conv, opt);
  std::vector<Var> terms;
  for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
    terms.push_back(g.cross_entropy(cg.probs[t], view.target(conv.utterances[t])));
  }
  if (shift_loss && shift != nullptr && conv.utterances.size() > 1) {
    const auto labels = conversation_shift_labels(corpus, conv, view);
    std::vector<Var> bce;
    for (std::size_t t = 1; t < conv.utterances.size(); ++t) bce.push_back(g.bce(cg.shift[t], labels[t - 1]));
    terms.push_back(g.scale(g.sum(bce), static_cast<T>(lambda)));
  }
  return g.sum(terms);
}

/// Runs `fn(i)` for i in [0, n) on up to `threads` threads, rethrowing the
/// first failure in index order.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
#ifdef _OPENMP
  const int nt = static_cast<int>(std::max<std::size_t>(1, std::min(threads, n)));
#pragma omp parallel for num_threads(nt) schedule(static)
#endif
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Accumulates the gradient of (1/B) * sum of conversation losses into the
/// tensors of `set` and returns the unscaled mean loss. Graphs are built
/// concurrently but summed in conversation order, so the result does not
/// depend on the thread count.
template <typename T>
double batch_gradient(ParamSet<T>& set, const ModelParams<T>& model, const ShiftNetParams<T>* shift,
                      const Corpus& corpus, std::span<const std::size_t> batch, const LabelView& view,
                      double lambda, bool shift_loss, const ForwardOptions& opt, std::size_t threads) {
  const T scale = T{1} / static_cast<T>(batch.size());
  const std::size_t wave = std::max<std::size_t>(1, threads);
  double loss = 0.0;
  std::vector<Graph<T>> graphs(std::min(wave, batch.size()));
  std::vector<double> losses(graphs.size());
  for (std::size_t start = 0; start < batch.size(); start += wave) {
    const std::size_t n = std::min(wave, batch.size() - start);
    parallel_for(n, threads, [&](std::size_t j) {
      Graph<T>& g = graphs[j];
      g = Graph<T>();
      const Conversation& conv = corpus.conversations[batch[start + j]];
      Var l = conversation_loss(g, model, shift, corpus, conv, view, lambda, shift_loss, opt);
      losses[j] = static_cast<double>(g.item(l));
      g.backward(g.scale(l, scale));
    });
    for (std::size_t j = 0; j < n; ++j) {
      set.accumulate(graphs[j]);
      loss += losses[j];
    }
  }
  return loss / static_cast<double>(batch.size());
}

struct PredictionRow {
  std::string conversation_id;
  std::size_t t = 0;
  int truth = 0;
  int pred = 0;
  double p_shift = 1.0;
};

struct Evaluation {
  MetricsReport report;
  std::vector<PredictionRow> rows;
};

/// Lowest index wins ties.
inline int argmax(std::span<const double> v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

template <typename T>
Evaluation evaluate(const ModelParams<T>& model, const ShiftNetParams<T>* shift, const Corpus& corpus,
                    const LabelView& view, std::size_t threads = 1) {
  const ShiftNetParams<T>* net = model.config.use_shift ? shift : nullptr;
  std::vector<ConversationOutput> outs(corpus.conversations.size());
  parallel_for(outs.size(), threads,
               [&](std::size_t i) { outs[i] = forward_conversation(model, net, corpus.conversations[i]); });

  const bool polar = view.has_polarity(corpus);
  Evaluation ev;
  std::vector<int> truth, pred;
  std::vector<std::optional<Polarity>> prev_pol;
  std::vector<Polarity> pol;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const Conversation& conv = corpus.conversations[i];
    for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
      const int y = view.target(conv.utterances[t]);
      const int yhat = argmax(outs[i].probs[t]);
      truth.push_back(y);
      pred.push_back(yhat);
      ev.rows.push_back({conv.id, t, y, yhat, outs[i].p_shift[t]});
      if (polar) {
        pol.push_back(view.polarity(corpus, conv.utterances[t]));
        prev_pol.push_back(t == 0 ? std::nullopt : std::optional<Polarity>(pol[pol.size() - 2]));
      }
    }
  }
  ev.report = compute_metrics(truth, pred, view.n_classes(corpus));
  ev.report.class_names = view.class_names(corpus);
  if (polar) add_shift_subsets(ev.report, truth, pred, prev_pol, pol);
  return ev;
}

/// Trains on `train` and selects the epoch with the best weighted F1 on `val`.
/// The shift net is updated jointly unless `freeze_shift` is set.
template <typename T>
TrainResult<T> train(ModelParams<T> model, std::type_identity_t<std::optional<ShiftNetParams<T>>> shift, const Corpus& train_c,
                     const Corpus& val_c, const LabelView& view, const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ValidationError("train: batch size must be positive");
  if (train_c.conversations.empty()) throw ValidationError("train: training split is empty");
  if (val_c.conversations.empty()) throw ValidationError("train: validation split is empty");
  if (model.config.n_classes != view.n_classes(train_c)) {
    throw ValidationError("train: model has " + std::to_string(model.config.n_classes) + " classes, task has " +
                          std::to_string(view.n_classes(train_c)));
  }
  const bool use_shift = model.config.use_shift;
  if (use_shift && !shift) throw ValidationError("train: the shift component needs a shift network");
  if (!use_shift) shift.reset();
  const bool shift_trainable = use_shift && !cfg.freeze_shift;
  const bool shift_loss = shift_trainable && cfg.lambda > 0.0;

  ParamSet<T> set;
  model.collect(set);
  if (shift_trainable) shift->collect(set);
  Adam<T> opt(set, cfg.adam);
  ForwardOptions fwd;
  fwd.gate_gradient = cfg.gate_gradient && shift_trainable;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_c.conversations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult<T> best{model, shift, {}, 0, 0.0, opt.state()};
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      set.zero_grad();
      loss_sum += batch_gradient(set, model, shift ? &*shift : nullptr, train_c,
                                 std::span<const std::size_t>(order).subspan(start, end - start), view, cfg.lambda,
                                 shift_loss, fwd, cfg.threads);
      opt.step();
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    const ShiftNetParams<T>* net = shift ? &*shift : nullptr;
    if (cfg.eval_train) rec.train_accuracy = evaluate(model, net, train_c, view, cfg.threads).report.accuracy;
    const Evaluation val = evaluate(model, net, val_c, view, cfg.threads);
    rec.val_weighted_f1 = val.report.weighted_f1;
    rec.val_accuracy = val.report.accuracy;
    best.history.push_back(rec);
    if (!have_best || rec.val_weighted_f1 > best.best_val_weighted_f1) {
      have_best = true;
      best.model = model;
      best.shift = shift;
      best.best_epoch = epoch;
      best.best_val_weighted_f1 = rec.val_weighted_f1;
      best.optimizer = opt.state();
    }
    if (cfg.on_epoch && !cfg.on_epoch(rec)) break;
  }
  return best;
}

/// Splits `corpus` by conversation (train_fraction, seed) before training.
template <typename T>
TrainResult<T> train(ModelParams<T> model, std::type_identity_t<std::optional<ShiftNetParams<T>>> shift, const Corpus& corpus,
                     const LabelView& view, const TrainConfig& cfg) {
  auto [train_c, val_c] = split_train_val(corpus, cfg.train_fraction, cfg.seed);
  return train(std::move(model), std::move(shift), train_c, val_c, view, cfg);
}

/// Parameters optimised by `train` for this configuration, in optimizer order.
template <typename T>
ParamSet<T> trainable_set(ModelParams<T>& model, std::optional<ShiftNetParams<T>>& shift, bool freeze_shift) {
  ParamSet<T> set;
  model.collect(set);
  if (model.config.use_shift && !freeze_shift && shift) shift->collect(set);
  return set;
}

}  // namespace arcnet
