#include "arcnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "arcnet/errors.hpp"

namespace arcnet {

using nlohmann::json;

Task parse_task(const std::string& s) {
  if (s == "sentiment2") return Task::Sentiment2;
  if (s == "emotion_multilabel" || s == "emotion-multilabel") return Task::EmotionMultilabel;
  if (s == "emotion4") return Task::Emotion4;
  if (s == "emotion6") return Task::Emotion6;
  throw ValidationError("unknown task '" + s + "'");
}

std::string to_string(Task t) {
  switch (t) {
    case Task::Sentiment2:
      return "sentiment2";
    case Task::EmotionMultilabel:
      return "emotion_multilabel";
    case Task::Emotion4:
      return "emotion4";
    case Task::Emotion6:
      return "emotion6";
  }
  return "emotion4";
}

std::size_t Corpus::utterance_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.utterances.size();
  return n;
}

std::size_t Corpus::pair_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.utterances.empty() ? 0 : c.utterances.size() - 1;
  return n;
}

namespace {

const char* modality_name(std::size_t m) {
  static constexpr const char* names[] = {"text", "audio", "video"};
  return names[m];
}

void check_utterance(const Corpus& c, const Utterance& u) {
  for (std::size_t m = 0; m < 3; ++m) {
    if (u.features[m].size() != c.dims[m]) {
      throw ValidationError("utterance '" + u.utterance_id + "': " + modality_name(m) +
                            " features have " + std::to_string(u.features[m].size()) +
                            " dims, header declares " + std::to_string(c.dims[m]));
    }
    for (double v : u.features[m]) {
      if (!std::isfinite(v)) {
        throw ValidationError("utterance '" + u.utterance_id + "': non-finite " + modality_name(m) +
                              " feature");
      }
    }
  }
  if (u.emotion_labels.empty() && !u.sentiment_score) {
    throw ValidationError("utterance '" + u.utterance_id +
                          "': needs an emotion_label or a sentiment_score");
  }
  if (u.emotion_labels.size() > 1 && c.task != Task::EmotionMultilabel) {
    throw ValidationError("utterance '" + u.utterance_id +
                          "': several emotion labels outside the multilabel task");
  }
  for (int l : u.emotion_labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= c.label_set.size()) {
      throw ValidationError("utterance '" + u.utterance_id + "': label " + std::to_string(l) +
                            " outside label_set");
    }
  }
  if (u.sentiment_score && !std::isfinite(*u.sentiment_score)) {
    throw ValidationError("utterance '" + u.utterance_id + "': non-finite sentiment_score");
  }
}

}  // namespace

void validate_corpus(const Corpus& c) {
  for (std::size_t m = 0; m < 3; ++m) {
    if (c.dims[m] == 0) throw ValidationError(std::string("corpus: ") + modality_name(m) + " dim must be positive");
  }
  if (c.label_set.empty() && c.task != Task::Sentiment2) throw ValidationError("corpus: empty label_set");
  std::set<std::string> unique(c.label_set.begin(), c.label_set.end());
  if (unique.size() != c.label_set.size()) throw ValidationError("corpus: duplicate labels in label_set");
  switch (c.task) {
    case Task::Sentiment2:
      break;
    case Task::Emotion4:
      if (c.label_set.size() > 4) throw ValidationError("corpus: emotion4 allows at most 4 labels");
      break;
    case Task::Emotion6:
    case Task::EmotionMultilabel:
      if (c.label_set.size() > 6) throw ValidationError("corpus: at most 6 emotion labels allowed");
      break;
  }
  if (!c.polarity_map.empty()) {
    for (const auto& l : c.label_set) {
      if (!c.polarity_map.contains(l)) throw ValidationError("corpus: polarity_map does not cover label '" + l + "'");
    }
  }
  std::set<std::string> ids;
  for (const auto& conv : c.conversations) {
    if (conv.utterances.empty()) throw ValidationError("conversation '" + conv.id + "' is empty");
    if (!ids.insert(conv.id).second) throw ValidationError("duplicate conversation id '" + conv.id + "'");
    for (const auto& u : conv.utterances) check_utterance(c, u);
  }
}

Corpus read_corpus(std::istream& in) {
  Corpus c;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError("corpus line " + std::to_string(lineno) + ": " + what);
  };

  bool have_header = false;
  std::vector<std::pair<std::size_t, Utterance>> pending;  // (position, utterance)
  std::string current_id;

  auto flush = [&]() {
    if (pending.empty()) return;
    std::stable_sort(pending.begin(), pending.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < pending.size(); ++i) {
      if (pending[i].first == pending[i - 1].first) {
        throw ValidationError("conversation '" + current_id + "': duplicate position " +
                              std::to_string(pending[i].first));
      }
    }
    Conversation conv{current_id, {}};
    for (auto& [pos, u] : pending) conv.utterances.push_back(std::move(u));
    c.conversations.push_back(std::move(conv));
    pending.clear();
  };

  std::set<std::string> finished;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        c.name = j.at("name").get<std::string>();
        auto dims = j.at("dims").get<std::vector<std::size_t>>();
        if (dims.size() != 3) throw fail("dims must list text, audio and video sizes");
        c.dims = {dims[0], dims[1], dims[2]};
        c.label_set = j.at("label_set").get<std::vector<std::string>>();
        if (j.contains("polarity_map") && !j["polarity_map"].is_null()) {
          for (auto& [k, v] : j["polarity_map"].items()) c.polarity_map[k] = parse_polarity(v.get<std::string>());
        }
        c.task = parse_task(j.at("task").get<std::string>());
        have_header = true;
        continue;
      }
      Utterance u;
      const auto conv_id = j.at("conversation_id").get<std::string>();
      const auto position = j.at("position").get<std::size_t>();
      u.utterance_id = j.at("utterance_id").get<std::string>();
      u.speaker = j.at("speaker").get<std::string>();
      u.features[0] = j.at("text_features").get<std::vector<double>>();
      u.features[1] = j.at("audio_features").get<std::vector<double>>();
      u.features[2] = j.at("video_features").get<std::vector<double>>();
      if (j.contains("emotion_label") && !j["emotion_label"].is_null()) {
        const auto& el = j["emotion_label"];
        if (el.is_array()) {
          u.emotion_labels = el.get<std::vector<int>>();
        } else {
          u.emotion_labels = {el.get<int>()};
        }
      }
      if (j.contains("sentiment_score") && !j["sentiment_score"].is_null()) {
        u.sentiment_score = j["sentiment_score"].get<double>();
      }
      if (conv_id != current_id) {
        flush();
        if (finished.contains(conv_id)) throw fail("conversation '" + conv_id + "' is not contiguous");
        finished.insert(conv_id);
        current_id = conv_id;
      }
      check_utterance(c, u);
      pending.emplace_back(position, std::move(u));
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      if (msg.rfind("corpus line", 0) == 0) throw;
      throw fail(msg);
    }
  }
  if (!have_header) throw ValidationError("corpus: missing header line");
  flush();
  validate_corpus(c);
  return c;
}

void write_corpus(const Corpus& c, std::ostream& out) {
  json header;
  header["name"] = c.name;
  header["dims"] = {c.dims[0], c.dims[1], c.dims[2]};
  header["label_set"] = c.label_set;
  json pm = json::object();
  for (const auto& [k, v] : c.polarity_map) pm[k] = to_string(v);
  header["polarity_map"] = pm;
  header["task"] = to_string(c.task);
  out << header.dump() << '\n';
  for (const auto& conv : c.conversations) {
    for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
      const auto& u = conv.utterances[t];
      json j;
      j["conversation_id"] = conv.id;
      j["position"] = t;
      j["utterance_id"] = u.utterance_id;
      j["speaker"] = u.speaker;
      j["text_features"] = u.features[0];
      j["audio_features"] = u.features[1];
      j["video_features"] = u.features[2];
      if (u.emotion_labels.empty()) {
        j["emotion_label"] = nullptr;
      } else if (c.task == Task::EmotionMultilabel) {
        j["emotion_label"] = u.emotion_labels;
      } else {
        j["emotion_label"] = u.emotion_labels.front();
      }
      j["sentiment_score"] = u.sentiment_score ? json(*u.sentiment_score) : json(nullptr);
      out << j.dump() << '\n';
    }
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  return read_corpus(in);
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write corpus file " + path.string());
  write_corpus(c, out);
}

// ---- labels ---------------------------------------------------------------

std::size_t LabelView::n_classes(const Corpus& c) const {
  switch (task) {
    case Task::Sentiment2:
    case Task::EmotionMultilabel:
      return 2;
    case Task::Emotion4:
    case Task::Emotion6:
      return c.label_set.size();
  }
  return c.label_set.size();
}

std::vector<std::string> LabelView::class_names(const Corpus& c) const {
  switch (task) {
    case Task::Sentiment2:
      return {"negative", "positive"};
    case Task::EmotionMultilabel: {
      const std::string& e = c.label_set.at(static_cast<std::size_t>(emotion_index));
      return {"not_" + e, e};
    }
    default:
      return c.label_set;
  }
}

int LabelView::target(const Utterance& u) const {
  switch (task) {
    case Task::Sentiment2:
      if (!u.sentiment_score) throw ValidationError("utterance '" + u.utterance_id + "' has no sentiment_score");
      return sentiment_polarity(*u.sentiment_score) == Polarity::Positive ? 1 : 0;
    case Task::EmotionMultilabel:
      if (emotion_index < 0) throw ValidationError("multilabel task needs an emotion index");
      return std::find(u.emotion_labels.begin(), u.emotion_labels.end(), emotion_index) !=
                     u.emotion_labels.end()
                 ? 1
                 : 0;
    case Task::Emotion4:
    case Task::Emotion6:
      if (u.emotion_labels.size() != 1) {
        throw ValidationError("utterance '" + u.utterance_id + "' needs exactly one emotion_label");
      }
      return u.emotion_labels.front();
  }
  return 0;
}

Polarity LabelView::polarity(const Corpus& c, const Utterance& u) const {
  if (task == Task::Sentiment2 || task == Task::EmotionMultilabel) {
    if (!u.sentiment_score) throw ValidationError("utterance '" + u.utterance_id + "' has no sentiment_score");
    return sentiment_polarity(*u.sentiment_score);
  }
  if (c.polarity_map.empty()) throw ValidationError("corpus '" + c.name + "' has no polarity_map");
  const std::string& name = c.label_set.at(static_cast<std::size_t>(target(u)));
  auto it = c.polarity_map.find(name);
  if (it == c.polarity_map.end()) throw ValidationError("label '" + name + "' has no polarity mapping");
  return it->second;
}

bool LabelView::has_polarity(const Corpus& c) const {
  if (task == Task::Sentiment2 || task == Task::EmotionMultilabel) {
    for (const auto& conv : c.conversations) {
      for (const auto& u : conv.utterances) {
        if (!u.sentiment_score) return false;
      }
    }
    return true;
  }
  return !c.polarity_map.empty();
}

std::vector<int> conversation_shift_labels(const Corpus& c, const Conversation& conv,
                                           const LabelView& view) {
  std::vector<Polarity> pol;
  pol.reserve(conv.utterances.size());
  for (const auto& u : conv.utterances) pol.push_back(view.polarity(c, u));
  return derive_shift_labels(pol);
}

double shift_statistics(const Corpus& c, const LabelView& view) {
  if (c.polarity_map.empty()) throw ValidationError("corpus '" + c.name + "' has no polarity_map");
  std::size_t pairs = 0, shifts = 0;
  for (const auto& conv : c.conversations) {
    auto labels = conversation_shift_labels(c, conv, view);
    pairs += labels.size();
    shifts += static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }
  if (pairs == 0) throw ValidationError("shift_statistics: corpus has no consecutive utterance pairs");
  return 100.0 * static_cast<double>(shifts) / static_cast<double>(pairs);
}

std::pair<Corpus, Corpus> split_train_val(const Corpus& c, double fraction, std::uint64_t seed) {
  const std::size_t n = c.conversations.size();
  if (n < 2) throw ValidationError("split_train_val: need at least 2 conversations, got " + std::to_string(n));
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split_train_val: fraction must be in (0, 1)");
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  Corpus train = c, val = c;
  train.conversations.clear();
  val.conversations.clear();
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : val).conversations.push_back(c.conversations[i]);
  }
  return {std::move(train), std::move(val)};
}

// ---- synthetic data -------------------------------------------------------

Corpus synth_generate(const SyntheticConfig& cfg) {
  if (cfg.n_classes == 0 || cfg.n_classes > 6) throw ValidationError("synth: n_classes must be in [1, 6]");
  if (!(cfg.inertia >= 0.0 && cfg.inertia <= 1.0)) throw ValidationError("synth: inertia must be in [0, 1]");
  if (!(cfg.noise > 0.0)) throw ValidationError("synth: noise must be positive");
  if (cfg.n_speakers == 0 || cfg.utterances_per_conversation == 0) {
    throw ValidationError("synth: need at least one speaker and one utterance per conversation");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, cfg.noise);

  const std::size_t K = cfg.n_classes;
  const std::size_t n_pos = (K + 1) / 2;
  auto class_polarity = [&](std::size_t k) { return k < n_pos ? Polarity::Positive : Polarity::Negative; };

  Corpus c;
  c.name = "synthetic";
  c.dims = cfg.dims;
  c.task = K <= 4 ? Task::Emotion4 : Task::Emotion6;
  for (std::size_t k = 0; k < K; ++k) {
    c.label_set.push_back("class" + std::to_string(k));
    c.polarity_map[c.label_set.back()] = class_polarity(k);
  }

  // Per-class ±1 sign pattern per modality; text coordinate 0 carries polarity.
  std::vector<std::array<std::vector<double>, 3>> pattern(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m = 0; m < 3; ++m) {
      pattern[k][m].resize(cfg.dims[m]);
      for (auto& s : pattern[k][m]) s = unit(rng) < 0.5 ? -1.0 : 1.0;
    }
    pattern[k][0][0] = class_polarity(k) == Polarity::Positive ? 1.0 : -1.0;
  }

  std::vector<std::size_t> pos_classes, neg_classes;
  for (std::size_t k = 0; k < K; ++k) (k < n_pos ? pos_classes : neg_classes).push_back(k);
  auto draw_class = [&](bool positive) {
    const auto& pool = positive || neg_classes.empty() ? pos_classes : neg_classes;
    auto idx = static_cast<std::size_t>(unit(rng) * static_cast<double>(pool.size()));
    return pool[std::min(idx, pool.size() - 1)];
  };

  for (std::size_t ci = 0; ci < cfg.n_conversations; ++ci) {
    Conversation conv;
    conv.id = "conv" + std::to_string(ci);
    bool positive = unit(rng) < 0.5;
    std::size_t cls = 0;
    for (std::size_t t = 0; t < cfg.utterances_per_conversation; ++t) {
      bool flipped = false;
      if (t > 0 && unit(rng) >= cfg.inertia) {
        positive = !positive;
        flipped = true;
      }
      if (t == 0 || flipped || unit(rng) >= cfg.class_persistence) cls = draw_class(positive);
      Utterance u;
      u.utterance_id = conv.id + "_u" + std::to_string(t);
      auto spk = static_cast<std::size_t>(unit(rng) * static_cast<double>(cfg.n_speakers));
      u.speaker = "S" + std::to_string(std::min(spk, cfg.n_speakers - 1));
      for (std::size_t m = 0; m < 3; ++m) {
        u.features[m].resize(cfg.dims[m]);
        for (std::size_t d = 0; d < cfg.dims[m]; ++d) {
          u.features[m][d] = cfg.separation * pattern[cls][m][d] + gauss(rng);
        }
      }
      u.emotion_labels = {static_cast<int>(cls)};
      const double magnitude = 0.5 + 2.5 * unit(rng);
      u.sentiment_score = class_polarity(cls) == Polarity::Positive ? magnitude : -magnitude;
      conv.utterances.push_back(std::move(u));
    }
    c.conversations.push_back(std::move(conv));
  }
  validate_corpus(c);
  return c;
}

}  // namespace arcnet
