#pragma once

// Corpus model, line-oriented JSON corpus files, shift statistics,
// conversation-level splitting and the synthetic conversation generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "arcnet/labels.hpp"

namespace arcnet {

enum class Modality { Text = 0, Audio = 1, Video = 2 };
inline constexpr std::array<Modality, 3> kModalities{Modality::Text, Modality::Audio, Modality::Video};

enum class Task { Sentiment2, EmotionMultilabel, Emotion4, Emotion6 };

/// Accepts both `emotion_multilabel` and `emotion-multilabel` spellings.
Task parse_task(const std::string& s);
std::string to_string(Task t);

/// Feature dimensions (text, audio, video).
using FeatureDims = std::array<std::size_t, 3>;

inline constexpr FeatureDims kMoseiDims{768, 384, 711};
inline constexpr FeatureDims kIemocapDims{768, 100, 512};

struct Utterance {
  std::string utterance_id;
  std::string speaker;
  std::array<std::vector<double>, 3> features;  // indexed by Modality
  std::vector<int> emotion_labels;              // empty: absent; >1 entries only for multilabel
  std::optional<double> sentiment_score;

  const std::vector<double>& feature(Modality m) const { return features[static_cast<int>(m)]; }
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
};

struct Corpus {
  std::string name;
  FeatureDims dims{};
  std::vector<std::string> label_set;
  PolarityMap polarity_map;  // may be empty when shifts are not needed
  Task task = Task::Emotion4;
  std::vector<Conversation> conversations;

  std::size_t utterance_count() const;
  std::size_t pair_count() const;
};

/// Checks every invariant of the corpus model; throws ValidationError naming
/// the offending utterance.
void validate_corpus(const Corpus& c);

Corpus read_corpus(std::istream& in);
void write_corpus(const Corpus& c, std::ostream& out);
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& c, const std::filesystem::path& path);

/// How labels of a corpus are turned into classification targets and
/// shift polarities for one task. For the multilabel task `emotion_index`
/// selects which emotion the binary classifier predicts.
struct LabelView {
  Task task = Task::Emotion4;
  int emotion_index = -1;

  static LabelView for_corpus(const Corpus& c) { return {c.task, -1}; }

  std::size_t n_classes(const Corpus& c) const;
  std::vector<std::string> class_names(const Corpus& c) const;
  int target(const Utterance& u) const;
  /// Sentiment track for sentiment2 and multilabel, polarity map otherwise.
  Polarity polarity(const Corpus& c, const Utterance& u) const;
  /// True when `polarity` succeeds for every utterance of the corpus.
  bool has_polarity(const Corpus& c) const;
};

/// Shift labels for each consecutive pair of a conversation.
std::vector<int> conversation_shift_labels(const Corpus& c, const Conversation& conv,
                                           const LabelView& view);

/// 100 * shifted pairs / consecutive pairs. Throws when there are no pairs.
double shift_statistics(const Corpus& c, const LabelView& view);
inline double shift_statistics(const Corpus& c) { return shift_statistics(c, LabelView::for_corpus(c)); }

/// Random conversation-level split. Both parts keep the original order.
std::pair<Corpus, Corpus> split_train_val(const Corpus& c, double fraction = 0.8,
                                          std::uint64_t seed = 42);

struct SyntheticConfig {
  std::size_t n_conversations = 50;
  std::size_t utterances_per_conversation = 8;
  std::size_t n_speakers = 2;
  std::size_t n_classes = 2;
  double inertia = 0.66;  // probability the latent polarity persists
  double separation = 2.0;
  double noise = 0.5;
  /// Probability that, absent a polarity flip, the class repeats instead of
  /// being redrawn within the polarity. 0 draws every utterance afresh.
  double class_persistence = 0.0;
  FeatureDims dims{16, 8, 8};
  std::uint64_t seed = 42;
};

/// Latent polarity follows a two-state Markov chain; classes split into a
/// positive half (first ceil(K/2)) and a negative half; features are
/// class-conditional Gaussians around ±separation sign patterns whose first
/// text coordinate encodes the polarity.
Corpus synth_generate(const SyntheticConfig& cfg);

}  // namespace arcnet
