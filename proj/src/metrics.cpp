#include "arcnet/metrics.hpp"

#include <nlohmann/json.hpp>

#include "arcnet/errors.hpp"

namespace arcnet {

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> pred, std::size_t n_classes) {
  if (truth.size() != pred.size()) throw ValidationError("metrics: truth and prediction lengths differ");
  if (truth.empty()) throw ValidationError("metrics: no predictions to score");
  if (n_classes == 0) throw ValidationError("metrics: need at least one class");
  MetricsReport r;
  r.n = truth.size();
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i], p = pred[i];
    if (y < 0 || p < 0 || static_cast<std::size_t>(y) >= n_classes || static_cast<std::size_t>(p) >= n_classes) {
      throw ValidationError("metrics: label outside [0, " + std::to_string(n_classes) + ")");
    }
    ++r.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
    if (y == p) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);

  r.per_class.resize(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) {
    auto& c = r.per_class[k];
    const std::size_t tp = r.confusion[k][k];
    for (std::size_t j = 0; j < n_classes; ++j) {
      c.support += r.confusion[k][j];
      c.predicted += r.confusion[j][k];
    }
    c.precision = c.predicted ? static_cast<double>(tp) / static_cast<double>(c.predicted) : 0.0;
    c.recall = c.support ? static_cast<double>(tp) / static_cast<double>(c.support) : 0.0;
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    r.weighted_f1 += static_cast<double>(c.support) / static_cast<double>(r.n) * c.f1;
    r.macro_f1 += c.f1;
  }
  r.macro_f1 /= static_cast<double>(n_classes);
  if (n_classes == 2) r.binary_f1 = r.per_class[1].f1;
  return r;
}

void add_shift_subsets(MetricsReport& r, std::span<const int> truth, std::span<const int> pred,
                       std::span<const std::optional<Polarity>> prev_polarity,
                       std::span<const Polarity> polarity) {
  if (truth.size() != pred.size() || truth.size() != prev_polarity.size() || truth.size() != polarity.size()) {
    throw ValidationError("shift subsets: input lengths differ");
  }
  r.positive_to_negative = {};
  r.negative_to_positive = {};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!prev_polarity[i]) continue;
    ShiftSubset* bucket = nullptr;
    if (*prev_polarity[i] == Polarity::Positive && polarity[i] == Polarity::Negative) {
      bucket = &r.positive_to_negative;
    } else if (*prev_polarity[i] == Polarity::Negative && polarity[i] == Polarity::Positive) {
      bucket = &r.negative_to_positive;
    }
    if (!bucket) continue;
    ++bucket->count;
    if (truth[i] == pred[i]) ++bucket->correct;
  }
  for (auto* b : {&r.positive_to_negative, &r.negative_to_positive}) {
    b->accuracy = b->count ? static_cast<double>(b->correct) / static_cast<double>(b->count) : 0.0;
  }
}

std::string metrics_to_json(const MetricsReport& r, int indent) {
  using nlohmann::json;
  json j;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["weighted_f1"] = r.weighted_f1;
  j["macro_f1"] = r.macro_f1;
  j["binary_f1"] = r.binary_f1 ? json(*r.binary_f1) : json(nullptr);
  json classes = json::array();
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const auto& c = r.per_class[k];
    classes.push_back({{"class", k < r.class_names.size() ? r.class_names[k] : std::to_string(k)},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support},
                       {"predicted", c.predicted}});
  }
  j["per_class"] = classes;
  j["confusion_matrix"] = r.confusion;
  auto subset = [](const ShiftSubset& s) {
    return json{{"count", s.count}, {"correct", s.correct}, {"accuracy", s.accuracy}};
  };
  j["shift_subsets"] = {{"positive_to_negative", subset(r.positive_to_negative)},
                        {"negative_to_positive", subset(r.negative_to_positive)}};
  return j.dump(indent);
}

}  // namespace arcnet
