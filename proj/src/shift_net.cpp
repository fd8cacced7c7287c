#include "arcnet/shift_net.hpp"

namespace arcnet {

ShiftInput parse_shift_input(const std::string& s) {
  if (s == "text") return ShiftInput::Text;
  if (s == "trimodal") return ShiftInput::Trimodal;
  throw ValidationError("unknown shift input '" + s + "' (expected text or trimodal)");
}

std::string to_string(ShiftInput s) { return s == ShiftInput::Text ? "text" : "trimodal"; }

std::vector<double> shift_features(const Utterance& u, ShiftInput input) {
  if (input == ShiftInput::Text) return u.features[0];
  std::vector<double> out;
  out.reserve(u.features[0].size() + u.features[1].size() + u.features[2].size());
  for (const auto& f : u.features) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace arcnet
