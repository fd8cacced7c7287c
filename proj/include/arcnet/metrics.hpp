#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arcnet/labels.hpp"

namespace arcnet {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // true occurrences
  std::size_t predicted = 0;  // predicted occurrences
};

/// Accuracy over the utterances that follow a shift in one direction.
struct ShiftSubset {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;  // 0 when count is 0
};

struct MetricsReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  /// Σ_k f_k F1_k with f_k the true-label frequency of class k.
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  /// F1 of class 1 when there are exactly two classes.
  std::optional<double> binary_f1;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][pred]
  std::vector<std::string> class_names;
  ShiftSubset positive_to_negative;
  ShiftSubset negative_to_positive;
};

/// Precision, recall and F1 per class from counts; classes with no
/// predictions (or no support) get precision (recall) 0 and, if both are 0,
/// F1 0.
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> pred, std::size_t n_classes);

/// Fills the shift subsets from per-utterance polarities of consecutive
/// truths. `prev_polarity[i]` is empty for utterances that open a
/// conversation.
void add_shift_subsets(MetricsReport& r, std::span<const int> truth, std::span<const int> pred,
                       std::span<const std::optional<Polarity>> prev_polarity,
                       std::span<const Polarity> polarity);

std::string metrics_to_json(const MetricsReport& r, int indent = 2);

}  // namespace arcnet
