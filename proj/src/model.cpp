#include "arcnet/model.hpp"

#include <sstream>

namespace arcnet {

ModalityMask ModalityMask::parse(const std::string& s) {
  ModalityMask mask;
  mask.on = {false, false, false};
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "l" || item == "text") {
      mask.on[0] = true;
    } else if (item == "a" || item == "audio") {
      mask.on[1] = true;
    } else if (item == "v" || item == "video") {
      mask.on[2] = true;
    } else {
      throw ValidationError("unknown modality '" + item + "' (expected l, a or v)");
    }
  }
  if (mask.count() == 0) throw ValidationError("modality set must not be empty");
  return mask;
}

std::string ModalityMask::to_string() const {
  std::string out;
  for (std::size_t m = 0; m < 3; ++m) {
    if (!on[m]) continue;
    if (!out.empty()) out += ',';
    out += modality_prefix(m);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> ModelConfig::fusion_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      if (modalities.active(i) && modalities.active(j)) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

void ModelConfig::validate() const {
  if (modalities.count() == 0) throw ValidationError("model: no active modality");
  if (party_dim == 0 || context_dim == 0 || emotion_dim == 0) throw ValidationError("model: state dims must be positive");
  if (n_classes == 0) throw ValidationError("model: n_classes must be positive");
  for (std::size_t m = 0; m < 3; ++m) {
    if (modalities.active(m) && feature_dims[m] == 0) {
      throw ValidationError(std::string("model: feature dim of modality ") + modality_prefix(m) + " is zero");
    }
  }
}

}  // namespace arcnet
