#include "arcnet/pretrain.hpp"

#include <nlohmann/json.hpp>

namespace arcnet {

std::vector<ShiftPair> collect_shift_pairs(const Corpus& c, const LabelView& view, ShiftInput input) {
  std::vector<ShiftPair> pairs;
  for (const auto& conv : c.conversations) {
    if (conv.utterances.size() < 2) continue;
    const auto labels = conversation_shift_labels(c, conv, view);
    for (std::size_t t = 1; t < conv.utterances.size(); ++t) {
      pairs.push_back({shift_features(conv.utterances[t - 1], input), shift_features(conv.utterances[t], input),
                       labels[t - 1]});
    }
  }
  return pairs;
}

std::string shift_report_to_json(const ShiftReport& r, int indent) {
  using nlohmann::json;
  json j;
  j["accuracy"] = r.accuracy;
  j["shift_f1"] = r.f1;
  j["best_epoch"] = r.best_epoch;
  j["train_pairs"] = r.train_pairs;
  j["val_pairs"] = r.val_pairs;
  j["metrics"] = json::parse(metrics_to_json(r.metrics, -1));
  json hist = json::array();
  for (const auto& e : r.history) {
    hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy},
                    {"val_f1", e.val_f1}});
  }
  j["history"] = hist;
  return j.dump(indent);
}

}  // namespace arcnet
