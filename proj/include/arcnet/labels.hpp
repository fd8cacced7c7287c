#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace arcnet {

enum class Polarity { Positive, Negative, Neutral };

/// Label name -> polarity. Must be total over a corpus label set.
using PolarityMap = std::map<std::string, Polarity>;

Polarity parse_polarity(const std::string& s);
std::string to_string(Polarity p);

/// Scores on the [-3, 3] sentiment scale: >= 0 is positive, < 0 negative.
Polarity sentiment_polarity(double score);

/// 1 iff the consecutive pair flips between positive and negative; any pair
/// touching neutral is 0. Output has length n - 1; an empty input throws.
std::vector<int> derive_shift_labels(std::span<const Polarity> polarities);

/// Same, over label names resolved through `map`. Throws ValidationError on
/// a label the map does not cover.
std::vector<int> derive_shift_labels(std::span<const std::string> labels, const PolarityMap& map);

}  // namespace arcnet
