// arcnet command-line entry point.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arcnet/checkpoint.hpp"
#include "arcnet/data.hpp"
#include "arcnet/errors.hpp"
#include "arcnet/grad_check.hpp"
#include "arcnet/metrics.hpp"
#include "arcnet/model.hpp"
#include "arcnet/pretrain.hpp"
#include "arcnet/serialize.hpp"
#include "arcnet/shift_net.hpp"
#include "arcnet/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace arcnet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  // shared
  std::string corpus, out, config;
  std::string task;
  std::uint64_t seed = 42;
  std::size_t threads = 1;

  // synth
  std::size_t conversations = 50, utterances = 8, speakers = 2, classes = 2;
  std::optional<std::size_t> pairs;
  double rho = 0.66, mu = 2.0, sigma = 0.5, class_persistence = 0.0;
  std::string dims = "16,8,8";

  // shift net
  std::size_t siamese_hidden = 300;
  bool siamese_linear = false;
  std::string shift_input = "text";

  // model and training
  std::string modalities = "l,a,v";
  std::size_t party_dim = 150, context_dim = 150, emotion_dim = 100;
  bool arc_bias = false;
  bool no_shift = false, shift_from_scratch = false, freeze_shift = false, gate_gradient = false;
  std::string shift_checkpoint, val_corpus;
  double lambda = 1.0, train_fraction = 0.8;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr;
  double weight_decay = 1e-4;
  std::string weight_decay_mode = "decoupled";
  bool eval_train = false;

  // eval / gates
  std::string checkpoint, baseline_checkpoint, subset = "all", conversation;

  // gradcheck
  double tolerance = 1e-4;
  std::string difference = "extended";
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

fs::path require_out(const Options& o, const std::string& command) {
  if (o.out.empty()) throw UsageError(command + ": --out is required");
  return o.out;
}

Corpus require_corpus(const Options& o, const std::string& command) {
  if (o.corpus.empty()) throw UsageError(command + ": --corpus is required");
  Corpus c = load_corpus(o.corpus);
  if (!o.task.empty()) {
    c.task = parse_task(o.task);
    validate_corpus(c);
  }
  return c;
}

FeatureDims parse_dims(const std::string& s) {
  FeatureDims d{};
  std::stringstream ss(s);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) break;
    try {
      d[i++] = std::stoul(part);
    } catch (const std::exception&) {
      throw UsageError("--dims expects three comma separated sizes, got '" + s + "'");
    }
  }
  if (i != 3) throw UsageError("--dims expects three comma separated sizes, got '" + s + "'");
  return d;
}

/// One binary view per emotion for the multilabel task, one view otherwise.
std::vector<std::pair<std::string, LabelView>> task_views(const Corpus& c) {
  if (c.task != Task::EmotionMultilabel) return {{"", LabelView::for_corpus(c)}};
  std::vector<std::pair<std::string, LabelView>> views;
  for (std::size_t e = 0; e < c.label_set.size(); ++e) {
    views.push_back({"emotion_" + c.label_set[e], LabelView{c.task, static_cast<int>(e)}});
  }
  return views;
}

ShiftNetConfig shift_config(const Options& o, const Corpus& c) {
  ShiftNetConfig s;
  s.input = parse_shift_input(o.shift_input);
  s.feature_dim = shift_feature_dim(c.dims, s.input);
  s.hidden_dim = o.siamese_hidden;
  s.linear = o.siamese_linear;
  if (s.hidden_dim == 0) throw UsageError("--siamese-hidden must be positive");
  return s;
}

AdamConfig adam_config(const Options& o, double default_lr) {
  AdamConfig a;
  a.lr = o.lr.value_or(default_lr);
  a.weight_decay = o.weight_decay;
  if (o.weight_decay_mode == "coupled") {
    a.decay = WeightDecayMode::Coupled;
  } else if (o.weight_decay_mode != "decoupled") {
    throw UsageError("--weight-decay-mode must be decoupled or coupled");
  }
  return a;
}

template <typename T>
Checkpoint shift_checkpoint(ShiftNetParams<T>& p) {
  Checkpoint ck;
  ck.meta["kind"] = "shift";
  ck.meta["shift_config"] = to_json(p.config);
  ParamSet<T> set;
  p.collect(set);
  export_params(set, ck);
  return ck;
}

void check_shift_fits(const ShiftNetConfig& s, const Corpus& c) {
  if (s.feature_dim != shift_feature_dim(c.dims, s.input)) {
    throw ValidationError("shift network expects " + std::to_string(s.feature_dim) + " " + to_string(s.input) +
                          " features, corpus provides " + std::to_string(shift_feature_dim(c.dims, s.input)));
  }
}

void check_model_fits(const ModelConfig& m, const Corpus& c, const LabelView& view) {
  if (m.feature_dims != c.dims) throw ValidationError("model feature dims do not match the corpus header");
  if (m.n_classes != view.n_classes(c)) {
    throw ValidationError("model has " + std::to_string(m.n_classes) + " classes, corpus task has " +
                          std::to_string(view.n_classes(c)));
  }
}

std::string predictions_csv(const Evaluation& ev) {
  std::string s = "conversation_id,t,truth,pred,p_shift\n";
  for (const auto& r : ev.rows) {
    s += r.conversation_id + "," + std::to_string(r.t) + "," + std::to_string(r.truth) + "," +
         std::to_string(r.pred) + "," + fmt(r.p_shift) + "\n";
  }
  return s;
}

std::string shift_subset_lines(const MetricsReport& r) {
  auto line = [](const char* name, const ShiftSubset& s) {
    return std::string(name) + " accuracy=" + fmt(s.accuracy) + " correct=" + std::to_string(s.correct) +
           " count=" + std::to_string(s.count) + "\n";
  };
  return line("positive_to_negative", r.positive_to_negative) + line("negative_to_positive", r.negative_to_positive);
}

// ---- synth / stats -----------------------------------------------------------

int cmd_synth(const Options& o) {
  SyntheticConfig sc;
  sc.n_conversations = o.conversations;
  sc.utterances_per_conversation = o.utterances;
  sc.n_speakers = o.speakers;
  sc.n_classes = o.classes;
  sc.inertia = o.rho;
  sc.separation = o.mu;
  sc.noise = o.sigma;
  sc.class_persistence = o.class_persistence;
  sc.dims = parse_dims(o.dims);
  sc.seed = o.seed;
  if (o.pairs) {
    if (sc.utterances_per_conversation < 2) throw UsageError("--pairs needs at least 2 utterances per conversation");
    const std::size_t per = sc.utterances_per_conversation - 1;
    sc.n_conversations = (*o.pairs + per - 1) / per;
  }
  Corpus c = synth_generate(sc);
  save_corpus(c, require_out(o, "synth"));
  std::cout << "wrote " << c.conversations.size() << " conversations, " << c.pair_count() << " pairs to " << o.out
            << "\n";
  return 0;
}

int cmd_stats(const Options& o) {
  Corpus c = require_corpus(o, "stats");
  json j;
  j["corpus"] = c.name;
  j["conversations"] = c.conversations.size();
  j["utterances"] = c.utterance_count();
  j["pairs"] = c.pair_count();
  j["shift_percentage"] = shift_statistics(c, LabelView::for_corpus(c));
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!o.out.empty()) write_text(o.out, text);
  return 0;
}

// ---- pretrain-shift ---------------------------------------------------------

template <typename T>
int cmd_pretrain(const Options& o) {
  Corpus c = require_corpus(o, "pretrain-shift");
  const fs::path out = require_out(o, "pretrain-shift");
  const auto view = LabelView::for_corpus(c);
  PretrainConfig pc;
  pc.batch_size = o.batch_size.value_or(8);
  pc.epochs = o.epochs.value_or(5);
  pc.seed = o.seed;
  pc.train_fraction = o.train_fraction;
  pc.adam = adam_config(o, 1e-4);
  auto res = pretrain(ShiftNetParams<T>::random(shift_config(o, c), o.seed), c, view, pc);

  Checkpoint ck = shift_checkpoint(res.params);
  ck.meta["corpus_hash"] = file_hash(o.corpus);
  ck.meta["pretrain"] = {{"batch_size", pc.batch_size}, {"epochs", pc.epochs}, {"seed", pc.seed},
                         {"adam", to_json(pc.adam)}};
  ck.meta["best_epoch"] = res.report.best_epoch;
  ck.meta["val_f1"] = res.report.f1;
  fs::create_directories(out);
  save_checkpoint(ck, out / "shift.ckpt");
  const std::string report = shift_report_to_json(res.report);
  write_text(out / "shift_report.json", report + "\n");
  std::cout << report << "\n";
  return 0;
}

// ---- train ----------------------------------------------------------------------

template <typename T>
std::optional<ShiftNetParams<T>> initial_shift(const Options& o, const Corpus& c) {
  if (o.no_shift) return std::nullopt;
  if (!o.shift_checkpoint.empty()) {
    if (o.shift_from_scratch) throw UsageError("--shift-checkpoint and --shift-from-scratch are exclusive");
    auto p = shift_params_from_checkpoint<T>(load_checkpoint(o.shift_checkpoint));
    check_shift_fits(p.config, c);
    return p;
  }
  if (o.shift_from_scratch) return ShiftNetParams<T>::random(shift_config(o, c), o.seed);
  throw UsageError("train: a pretrained shift network is required (--shift-checkpoint), or pass --no-shift or "
                   "--shift-from-scratch");
}

template <typename T>
Checkpoint model_checkpoint(TrainResult<T>& r, const Corpus& c, const LabelView& view, const TrainConfig& tc) {
  Checkpoint ck;
  ck.meta["kind"] = "model";
  ck.meta["model_config"] = to_json(r.model.config);
  ck.meta["task"] = to_string(view.task);
  ck.meta["emotion_index"] = view.emotion_index;
  ck.meta["best_epoch"] = r.best_epoch;
  ck.meta["best_val_weighted_f1"] = r.best_val_weighted_f1;
  ck.meta["train"] = {{"batch_size", tc.batch_size}, {"epochs", tc.epochs},      {"seed", tc.seed},
                      {"lambda", tc.lambda},         {"freeze_shift", tc.freeze_shift},
                      {"gate_gradient", tc.gate_gradient}, {"adam", to_json(tc.adam)}};
  ck.meta["corpus"] = c.name;
  ParamSet<T> set = trainable_set(r.model, r.shift, tc.freeze_shift);
  ParamSet<T> all;
  r.model.collect(all);
  if (r.shift) {
    ck.meta["shift_config"] = to_json(r.shift->config);
    r.shift->collect(all);
  }
  export_params(all, ck);
  export_optimizer(set, r.optimizer, ck);
  return ck;
}

template <typename T>
int cmd_train(const Options& o) {
  Corpus c = require_corpus(o, "train");
  const fs::path out = require_out(o, "train");
  if (o.no_shift && (o.shift_from_scratch || !o.shift_checkpoint.empty() || o.freeze_shift)) {
    throw UsageError("--no-shift cannot be combined with shift network options");
  }
  if (o.lambda < 0.0) throw UsageError("--lambda must be non-negative");
  std::optional<Corpus> val;
  if (!o.val_corpus.empty()) {
    val = load_corpus(o.val_corpus);
    val->task = c.task;
    if (val->dims != c.dims) throw ValidationError("validation corpus dims differ from the training corpus");
  }
  fs::create_directories(out);
  std::ofstream log(out / "train.log", std::ios::app);

  for (const auto& [sub, view] : task_views(c)) {
    const fs::path dir = sub.empty() ? out : out / sub;
    ModelConfig mc;
    mc.feature_dims = c.dims;
    mc.party_dim = o.party_dim;
    mc.context_dim = o.context_dim;
    mc.emotion_dim = o.emotion_dim;
    mc.n_classes = view.n_classes(c);
    mc.modalities = ModalityMask::parse(o.modalities);
    mc.use_shift = !o.no_shift;
    mc.arc_bias = o.arc_bias;
    mc.validate();

    TrainConfig tc;
    tc.batch_size = o.batch_size.value_or(128);
    tc.epochs = o.epochs.value_or(50);
    tc.seed = o.seed;
    tc.train_fraction = o.train_fraction;
    tc.lambda = o.lambda;
    tc.freeze_shift = o.freeze_shift;
    tc.gate_gradient = o.gate_gradient;
    tc.adam = adam_config(o, 1e-4);
    tc.threads = o.threads;
    tc.eval_train = o.eval_train;
    const std::string label = sub.empty() ? std::string("train") : sub;
    tc.on_epoch = [&](const EpochRecord& e) {
      std::cout << label << " epoch " << e.epoch << " loss " << fmt(e.train_loss) << " val_weighted_f1 "
                << fmt(e.val_weighted_f1) << "\n";
      log << timestamp() << " " << label << " epoch " << e.epoch << " loss " << fmt(e.train_loss)
          << " val_weighted_f1 " << fmt(e.val_weighted_f1) << "\n";
      return true;
    };
    log << timestamp() << " " << label << " start corpus=" << o.corpus << " seed=" << o.seed << "\n";

    auto shift = initial_shift<T>(o, c);
    auto model = ModelParams<T>::random(mc, o.seed);
    Corpus train_c, val_c;
    if (val) {
      train_c = c;
      val_c = *val;
    } else {
      std::tie(train_c, val_c) = split_train_val(c, tc.train_fraction, tc.seed);
    }
    auto result = train(std::move(model), std::move(shift), train_c, val_c, view, tc);

    fs::create_directories(dir);
    save_checkpoint(model_checkpoint(result, c, view, tc), dir / "model.ckpt");
    json hist = json::array();
    for (const auto& e : result.history) {
      json h{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_weighted_f1", e.val_weighted_f1},
             {"val_accuracy", e.val_accuracy}};
      if (e.train_accuracy) h["train_accuracy"] = *e.train_accuracy;
      hist.push_back(h);
    }
    json summary{{"best_epoch", result.best_epoch},
                 {"best_val_weighted_f1", result.best_val_weighted_f1},
                 {"history", hist}};
    write_text(dir / "history.json", summary.dump(2) + "\n");
    const ShiftNetParams<T>* net = result.shift ? &*result.shift : nullptr;
    Evaluation ev = evaluate(result.model, net, val_c, view, o.threads);
    write_text(dir / "metrics.json", metrics_to_json(ev.report) + "\n");
    write_text(dir / "predictions.csv", predictions_csv(ev));
    std::cout << label << " best epoch " << result.best_epoch << " val_weighted_f1 "
              << fmt(result.best_val_weighted_f1) << "\n";
    log << timestamp() << " " << label << " done best_epoch=" << result.best_epoch << "\n";
  }
  return 0;
}

// ---- eval -----------------------------------------------------------------------

template <typename T>
struct LoadedModel {
  ModelParams<T> model;
  std::optional<ShiftNetParams<T>> shift;
  LabelView view;
};

template <typename T>
LoadedModel<T> load_model(const std::string& path, const Corpus& c) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", std::string()) != "model") throw ValidationError(path + " is not a model checkpoint");
  LoadedModel<T> m{model_params_from_checkpoint<T>(ck), std::nullopt, LabelView{}};
  if (ck.meta.contains("shift_config")) m.shift = shift_params_from_checkpoint<T>(ck);
  m.view.task = parse_task(ck.meta.at("task").get<std::string>());
  m.view.emotion_index = ck.meta.value("emotion_index", -1);
  check_model_fits(m.model.config, c, m.view);
  if (m.shift) check_shift_fits(m.shift->config, c);
  return m;
}

template <typename T>
int cmd_eval(const Options& o) {
  Corpus c = require_corpus(o, "eval");
  if (o.checkpoint.empty()) throw UsageError("eval: --checkpoint is required");
  if (o.subset != "all" && o.subset != "shift") throw UsageError("--subset must be all or shift");
  auto m = load_model<T>(o.checkpoint, c);
  c.task = m.view.task;
  Evaluation ev = evaluate(m.model, m.shift ? &*m.shift : nullptr, c, m.view, o.threads);
  const std::string metrics = metrics_to_json(ev.report) + "\n";
  if (o.subset == "shift") {
    if (!m.view.has_polarity(c)) throw ValidationError("eval --subset shift needs polarities for every utterance");
    std::cout << shift_subset_lines(ev.report);
  } else {
    std::cout << metrics;
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "metrics.json", metrics);
    write_text(fs::path(o.out) / "predictions.csv", predictions_csv(ev));
  }
  return 0;
}

// ---- gates ----------------------------------------------------------------------

template <typename T>
int cmd_gates(const Options& o) {
  Corpus c = require_corpus(o, "gates");
  if (c.conversations.empty()) throw ValidationError("corpus has no conversations");
  const Conversation* conv = &c.conversations.front();
  if (!o.conversation.empty()) {
    conv = nullptr;
    for (const auto& cv : c.conversations) {
      if (cv.id == o.conversation) conv = &cv;
    }
    if (!conv) throw ValidationError("conversation '" + o.conversation + "' not found");
  }
  const auto view = LabelView::for_corpus(c);
  ModelConfig mc;
  mc.feature_dims = c.dims;
  mc.party_dim = o.party_dim;
  mc.context_dim = o.context_dim;
  mc.emotion_dim = o.emotion_dim;
  mc.n_classes = view.n_classes(c);
  mc.modalities = ModalityMask::parse(o.modalities);

  // with shift: the shift checkpoint (or the one stored with the model)
  std::optional<ShiftNetParams<T>> shift;
  std::optional<ModelParams<T>> with_model;
  if (!o.checkpoint.empty()) {
    auto m = load_model<T>(o.checkpoint, c);
    if (!m.model.config.use_shift) throw ValidationError("--checkpoint must hold a model with the shift component");
    with_model = m.model;
    shift = m.shift;
  }
  if (!o.shift_checkpoint.empty()) {
    shift = shift_params_from_checkpoint<T>(load_checkpoint(o.shift_checkpoint));
    check_shift_fits(shift->config, c);
  }
  if (!shift) throw UsageError("gates: pass --shift-checkpoint or a --checkpoint trained with the shift component");
  if (!with_model) {
    mc.use_shift = true;
    with_model = ModelParams<T>::random(mc, o.seed);
  }

  ModelParams<T> baseline = [&] {
    if (!o.baseline_checkpoint.empty()) {
      auto m = load_model<T>(o.baseline_checkpoint, c);
      if (m.model.config.use_shift) throw ValidationError("--baseline-checkpoint must be a --no-shift model");
      return m.model;
    }
    mc.use_shift = false;
    return ModelParams<T>::random(mc, o.seed);
  }();

  auto a = forward_conversation(*with_model, &*shift, *conv);
  auto b = forward_conversation(baseline, static_cast<const ShiftNetParams<T>*>(nullptr), *conv);
  std::string csv = "conversation_id,t,p_shift,one_minus_p_shift,mode\n";
  for (std::size_t t = 0; t < conv->utterances.size(); ++t) {
    csv += conv->id + "," + std::to_string(t) + "," + fmt(a.p_shift[t]) + "," + fmt(1.0 - a.p_shift[t]) + ",shift\n";
  }
  for (std::size_t t = 0; t < conv->utterances.size(); ++t) {
    csv += conv->id + "," + std::to_string(t) + "," + fmt(b.p_shift[t]) + "," + fmt(1.0 - b.p_shift[t]) +
           ",no_shift\n";
  }
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_text(o.out, csv);
  }
  return 0;
}

// ---- gradcheck --------------------------------------------------------------

template <typename R, typename T>
void mirror(ModelParams<R>& dst, ModelParams<T>& src) {
  std::map<std::string, Tensor<T>*> by_name;
  src.for_each([&](const std::string& n, Tensor<T>& t) { by_name[n] = &t; });
  dst.for_each([&](const std::string& n, Tensor<R>& t) { t = tensor_cast<R>(*by_name.at(n)); });
}

std::string group_of(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

json gradcheck_mode(const Options& o, bool use_shift, bool& failed) {
  using Wide = long double;
  ModelConfig mc;
  mc.feature_dims = {4, 3, 2};
  mc.party_dim = 5;
  mc.context_dim = 4;
  mc.emotion_dim = 3;
  mc.n_classes = 3;
  mc.use_shift = use_shift;
  ShiftNetConfig sc;
  sc.feature_dim = 4;
  sc.hidden_dim = 6;

  // two speakers, three utterances; class 0 positive, 1 and 2 negative
  Corpus c;
  c.name = "gradcheck";
  c.dims = mc.feature_dims;
  c.label_set = {"pos", "neg", "neg2"};
  c.polarity_map = {{"pos", Polarity::Positive}, {"neg", Polarity::Negative}, {"neg2", Polarity::Negative}};
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Conversation conv{"toy", {}};
  for (int t = 0; t < 3; ++t) {
    Utterance u;
    u.utterance_id = "u" + std::to_string(t);
    u.speaker = t == 1 ? "B" : "A";
    for (std::size_t m = 0; m < 3; ++m) {
      u.features[m].resize(mc.feature_dims[m]);
      for (auto& v : u.features[m]) v = n(rng);
    }
    u.emotion_labels = {t};
    conv.utterances.push_back(u);
  }
  c.conversations.push_back(conv);
  const auto view = LabelView::for_corpus(c);

  auto model = ModelParams<double>::random(mc, o.seed);
  auto net = ShiftNetParams<double>::random(sc, o.seed);
  auto wide_model = ModelParams<Wide>::zeros(mc);
  mirror(wide_model, model);
  auto wide_net = ShiftNetParams<Wide>::zeros(sc);
  wide_net.W1 = tensor_cast<Wide>(net.W1);
  wide_net.b1 = tensor_cast<Wide>(net.b1);
  wide_net.w2 = tensor_cast<Wide>(net.w2);
  wide_net.b2 = tensor_cast<Wide>(net.b2);

  ForwardOptions fwd;
  fwd.gate_gradient = true;
  auto loss = [&](auto& g, auto& m, auto& s) {
    return conversation_loss(g, m, use_shift ? &s : nullptr, c, c.conversations[0], view, 1.0, use_shift, fwd);
  };

  ParamSet<double> all;
  ParamSet<Wide> all_wide;
  model.collect(all);
  wide_model.collect(all_wide);
  if (use_shift) {
    net.collect(all);
    wide_net.collect(all_wide);
  }
  std::vector<std::string> groups;
  for (const auto& e : all.entries()) {
    if (std::find(groups.begin(), groups.end(), group_of(e.name)) == groups.end()) groups.push_back(group_of(e.name));
  }

  json out;
  double worst = 0.0;
  for (const auto& grp : groups) {
    ParamSet<double> set;
    ParamSet<Wide> wide;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (group_of(all.entries()[i].name) != grp) continue;
      set.add(all.entries()[i].name, *all.entries()[i].tensor);
      wide.add(all_wide.entries()[i].name, *all_wide.entries()[i].tensor);
    }
    GradCheckResult r;
    if (o.difference == "f64") {
      r = grad_check<double>([&](Graph<double>& g) { return loss(g, model, net); }, set);
    } else {
      r = grad_check_reference<double, Wide>([&](Graph<double>& g) { return loss(g, model, net); }, set,
                                             [&](Graph<Wide>& g) { return loss(g, wide_model, wide_net); }, wide);
    }
    worst = std::max(worst, r.max_rel_error);
    out["groups"][grp] = {{"max_rel_error", r.max_rel_error},
                          {"entries", r.entries_checked},
                          {"worst_param", r.worst_param},
                          {"worst_index", r.worst_index}};
    std::cout << (use_shift ? "shift    " : "no_shift ") << grp << " max_rel_error " << fmt(r.max_rel_error)
              << (r.max_rel_error <= o.tolerance ? "" : "  FAIL") << "\n";
  }
  out["max_rel_error"] = worst;
  if (!(worst <= o.tolerance)) failed = true;
  return out;
}

int cmd_gradcheck(const Options& o) {
  if (o.difference != "extended" && o.difference != "f64") throw UsageError("--difference must be extended or f64");
  bool failed = false;
  json j;
  j["tolerance"] = o.tolerance;
  j["difference"] = o.difference;
  j["shift"] = gradcheck_mode(o, true, failed);
  j["no_shift"] = gradcheck_mode(o, false, failed);
  j["passed"] = !failed;
  if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
  std::cout << (failed ? "gradcheck FAILED" : "gradcheck passed") << "\n";
  return failed ? kExitNumerical : 0;
}

// ---- dispatch ---------------------------------------------------------------------

enum class Precision { F32, F64 };

Precision precision_from_env() {
  const char* v = std::getenv("ARCNET_PRECISION");
  if (v == nullptr || std::string(v).empty() || std::string(v) == "f64") return Precision::F64;
  if (std::string(v) == "f32") return Precision::F32;
  throw UsageError(std::string("ARCNET_PRECISION must be f32 or f64, got '") + v + "'");
}

template <template <typename> class Cmd>
int dispatch(Precision p, const Options& o) {
  return p == Precision::F32 ? Cmd<float>::run(o) : Cmd<double>::run(o);
}

template <typename T>
struct Pretrain {
  static int run(const Options& o) { return cmd_pretrain<T>(o); }
};
template <typename T>
struct Train {
  static int run(const Options& o) { return cmd_train<T>(o); }
};
template <typename T>
struct Eval {
  static int run(const Options& o) { return cmd_eval<T>(o); }
};
template <typename T>
struct Gates {
  static int run(const Options& o) { return cmd_gates<T>(o); }
};

void add_shift_net_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--siamese-hidden", o.siamese_hidden, "Shift-net hidden width")->capture_default_str();
  cmd->add_flag("--siamese-linear", o.siamese_linear, "Identity hidden activation");
  cmd->add_option("--shift-input", o.shift_input, "Shift-net input: text or trimodal")->capture_default_str();
}

void add_model_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--modalities", o.modalities, "Active modalities, e.g. l,a")->capture_default_str();
  cmd->add_option("--party-dim", o.party_dim)->capture_default_str();
  cmd->add_option("--context-dim", o.context_dim)->capture_default_str();
  cmd->add_option("--emotion-dim", o.emotion_dim)->capture_default_str();
}

void add_optimizer_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Conversations (train) or pairs (pretrain) per update");
  cmd->add_option("--lr", o.lr, "Adam learning rate (default 1e-4)");
  cmd->add_option("--weight-decay", o.weight_decay)->capture_default_str();
  cmd->add_option("--weight-decay-mode", o.weight_decay_mode, "decoupled or coupled")->capture_default_str();
  cmd->add_option("--train-fraction", o.train_fraction, "Train share of the conversation split")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"arcnet: emotion-shift aware multimodal conversation classifier"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.add_option("--seed", o.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--threads", o.threads, "Conversations processed concurrently")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", o.out, "Corpus file to write")->required();
  synth->add_option("--conversations", o.conversations)->capture_default_str();
  synth->add_option("--utterances", o.utterances, "Utterances per conversation")->capture_default_str();
  synth->add_option("--pairs", o.pairs, "Minimum consecutive pairs (overrides --conversations)");
  synth->add_option("--speakers", o.speakers)->capture_default_str();
  synth->add_option("--classes", o.classes)->capture_default_str();
  synth->add_option("--rho", o.rho, "Probability the latent polarity persists")->capture_default_str();
  synth->add_option("--mu", o.mu, "Class-mean separation")->capture_default_str();
  synth->add_option("--sigma", o.sigma, "Feature noise")->capture_default_str();
  synth->add_option("--class-persistence", o.class_persistence)->capture_default_str();
  synth->add_option("--dims", o.dims, "Text,audio,video feature sizes")->capture_default_str();
  synth->add_option("--seed", o.seed)->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Shift percentage over consecutive pairs");
  stats->add_option("--corpus", o.corpus)->required();
  stats->add_option("--task", o.task);
  stats->add_option("--out", o.out, "Also write the JSON here");

  auto* pre = app.add_subcommand("pretrain-shift", "Pretrain the shift network on shift labels");
  pre->add_option("--corpus", o.corpus)->required();
  pre->add_option("--task", o.task);
  pre->add_option("--out", o.out, "Output directory")->required();
  pre->add_option("--seed", o.seed)->capture_default_str();
  add_shift_net_options(pre, o);
  add_optimizer_options(pre, o);

  auto* tr = app.add_subcommand("train", "Train the dialogue model");
  tr->add_option("--corpus", o.corpus)->required();
  tr->add_option("--val-corpus", o.val_corpus, "Validation corpus instead of a split");
  tr->add_option("--task", o.task, "sentiment2, emotion-multilabel, emotion4 or emotion6");
  tr->add_option("--out", o.out, "Output directory")->required();
  tr->add_option("--seed", o.seed)->capture_default_str();
  tr->add_option("--threads", o.threads)->capture_default_str();
  tr->add_flag("--no-shift", o.no_shift, "Learned GRU emotion cell, no shift network");
  tr->add_option("--shift-checkpoint", o.shift_checkpoint, "Pretrained shift network");
  tr->add_flag("--shift-from-scratch", o.shift_from_scratch, "Randomly initialised shift network");
  tr->add_flag("--freeze-shift", o.freeze_shift, "Keep the shift network fixed");
  tr->add_flag("--gate-gradient", o.gate_gradient, "Backpropagate the classification loss into p_shift");
  tr->add_option("--lambda", o.lambda, "Weight of the shift loss")->capture_default_str();
  tr->add_flag("--arc-bias", o.arc_bias, "Bias term in the shift-gated candidate");
  tr->add_flag("--eval-train", o.eval_train, "Record training accuracy every epoch");
  add_model_options(tr, o);
  add_shift_net_options(tr, o);
  add_optimizer_options(tr, o);

  auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
  ev->add_option("--corpus", o.corpus)->required();
  ev->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  ev->add_option("--subset", o.subset, "all or shift")->capture_default_str();
  ev->add_option("--out", o.out, "Directory for metrics.json and predictions.csv");
  ev->add_option("--threads", o.threads)->capture_default_str();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter group");
  gc->add_option("--tolerance", o.tolerance)->capture_default_str();
  gc->add_option("--difference", o.difference, "extended (long double) or f64 difference quotients")
      ->capture_default_str();
  gc->add_option("--out", o.out, "JSON report");
  gc->add_option("--seed", o.seed)->capture_default_str();

  auto* gates = app.add_subcommand("gates", "Export 1 - p_shift per utterance with and without the shift net");
  gates->add_option("--corpus", o.corpus)->required();
  gates->add_option("--conversation", o.conversation, "Conversation id (default: first)");
  gates->add_option("--shift-checkpoint", o.shift_checkpoint);
  gates->add_option("--checkpoint", o.checkpoint, "Model trained with the shift component");
  gates->add_option("--baseline-checkpoint", o.baseline_checkpoint, "Model trained with --no-shift");
  gates->add_option("--out", o.out, "CSV file (default: stdout)");
  gates->add_option("--seed", o.seed)->capture_default_str();
  add_model_options(gates, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    const Precision p = precision_from_env();
    if (synth->parsed()) return cmd_synth(o);
    if (stats->parsed()) return cmd_stats(o);
    if (pre->parsed()) return dispatch<Pretrain>(p, o);
    if (tr->parsed()) return dispatch<Train>(p, o);
    if (ev->parsed()) return dispatch<Eval>(p, o);
    if (gc->parsed()) return cmd_gradcheck(o);
    if (gates->parsed()) return dispatch<Gates>(p, o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
