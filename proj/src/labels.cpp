#include "arcnet/labels.hpp"

#include "arcnet/errors.hpp"

namespace arcnet {

Polarity parse_polarity(const std::string& s) {
  if (s == "positive") return Polarity::Positive;
  if (s == "negative") return Polarity::Negative;
  if (s == "neutral") return Polarity::Neutral;
  throw ValidationError("unknown polarity '" + s + "' (expected positive, negative or neutral)");
}

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::Positive:
      return "positive";
    case Polarity::Negative:
      return "negative";
    case Polarity::Neutral:
      return "neutral";
  }
  return "neutral";
}

Polarity sentiment_polarity(double score) {
  return score >= 0.0 ? Polarity::Positive : Polarity::Negative;
}

std::vector<int> derive_shift_labels(std::span<const Polarity> polarities) {
  if (polarities.empty()) throw ValidationError("derive_shift_labels: empty label sequence");
  std::vector<int> out;
  out.reserve(polarities.size() - 1);
  for (std::size_t t = 1; t < polarities.size(); ++t) {
    const Polarity a = polarities[t - 1], b = polarities[t];
    const bool flip = (a == Polarity::Positive && b == Polarity::Negative) ||
                      (a == Polarity::Negative && b == Polarity::Positive);
    out.push_back(flip ? 1 : 0);
  }
  return out;
}

std::vector<int> derive_shift_labels(std::span<const std::string> labels, const PolarityMap& map) {
  std::vector<Polarity> pol;
  pol.reserve(labels.size());
  for (const auto& l : labels) {
    auto it = map.find(l);
    if (it == map.end()) throw ValidationError("label '" + l + "' has no polarity mapping");
    pol.push_back(it->second);
  }
  return derive_shift_labels(pol);
}

}  // namespace arcnet
