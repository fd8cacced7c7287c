#include "arcnet/serialize.hpp"

namespace arcnet {

using nlohmann::json;

json to_json(const ModelConfig& c) {
  return json{{"feature_dims", {c.feature_dims[0], c.feature_dims[1], c.feature_dims[2]}},
              {"party_dim", c.party_dim},
              {"context_dim", c.context_dim},
              {"emotion_dim", c.emotion_dim},
              {"n_classes", c.n_classes},
              {"modalities", c.modalities.to_string()},
              {"use_shift", c.use_shift},
              {"arc_bias", c.arc_bias}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    auto dims = j.at("feature_dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw ValidationError("model config: feature_dims needs 3 entries");
    c.feature_dims = {dims[0], dims[1], dims[2]};
    c.party_dim = j.at("party_dim").get<std::size_t>();
    c.context_dim = j.at("context_dim").get<std::size_t>();
    c.emotion_dim = j.at("emotion_dim").get<std::size_t>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.modalities = ModalityMask::parse(j.at("modalities").get<std::string>());
    c.use_shift = j.at("use_shift").get<bool>();
    c.arc_bias = j.value("arc_bias", false);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ShiftNetConfig& c) {
  return json{{"feature_dim", c.feature_dim},
              {"hidden_dim", c.hidden_dim},
              {"input", to_string(c.input)},
              {"linear", c.linear}};
}

ShiftNetConfig shift_config_from_json(const json& j) {
  ShiftNetConfig c;
  try {
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.input = parse_shift_input(j.at("input").get<std::string>());
    c.linear = j.value("linear", false);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("shift config: ") + e.what());
  }
  return c;
}

json to_json(const AdamConfig& c) {
  return json{{"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"decay", c.decay == WeightDecayMode::Decoupled ? "decoupled" : "coupled"}};
}

AdamConfig adam_config_from_json(const json& j) {
  AdamConfig c;
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.decay = j.value("decay", std::string("decoupled")) == "coupled" ? WeightDecayMode::Coupled
                                                                  : WeightDecayMode::Decoupled;
  return c;
}

}  // namespace arcnet
