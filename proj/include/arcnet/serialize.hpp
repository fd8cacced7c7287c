#pragma once

// Config <-> JSON and parameter sets <-> checkpoint tensors.

#include <string>

#include <nlohmann/json.hpp>

#include "arcnet/checkpoint.hpp"
#include "arcnet/model.hpp"
#include "arcnet/optim.hpp"
#include "arcnet/shift_net.hpp"

namespace arcnet {

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ShiftNetConfig& c);
ShiftNetConfig shift_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdamConfig& c);
AdamConfig adam_config_from_json(const nlohmann::json& j);

template <typename T>
void export_params(const ParamSet<T>& set, Checkpoint& ck) {
  for (const auto& e : set.entries()) {
    ck.tensors.push_back({e.name, e.tensor->shape, {e.tensor->data.begin(), e.tensor->data.end()}});
  }
}

/// Copies every tensor of `set` from the checkpoint; shapes must match.
template <typename T>
void import_params(const ParamSet<T>& set, const Checkpoint& ck) {
  for (const auto& e : set.entries()) {
    const NamedArray& a = ck.at(e.name);
    if (a.shape != e.tensor->shape) {
      throw ValidationError("checkpoint: tensor '" + e.name + "' has shape " + shape_string(a.shape) +
                            ", model expects " + shape_string(e.tensor->shape));
    }
    e.tensor->data.assign(a.data.begin(), a.data.end());
  }
}

template <typename T>
void export_optimizer(const ParamSet<T>& set, const AdamState<T>& st, Checkpoint& ck) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& e = set.entries()[i];
    ck.tensors.push_back({"optim.m." + e.name, e.tensor->shape, {st.first[i].begin(), st.first[i].end()}});
    ck.tensors.push_back({"optim.v." + e.name, e.tensor->shape, {st.second[i].begin(), st.second[i].end()}});
  }
  ck.meta["optimizer_step"] = st.step;
}

template <typename T>
AdamState<T> import_optimizer(const ParamSet<T>& set, const Checkpoint& ck) {
  AdamState<T> st;
  for (const auto& e : set.entries()) {
    const auto& m = ck.at("optim.m." + e.name);
    const auto& v = ck.at("optim.v." + e.name);
    st.first.emplace_back(m.data.begin(), m.data.end());
    st.second.emplace_back(v.data.begin(), v.data.end());
  }
  st.step = ck.meta.value("optimizer_step", std::uint64_t{0});
  return st;
}

/// Rebuilds shift-net parameters from a checkpoint holding `shift.*` tensors.
template <typename T>
ShiftNetParams<T> shift_params_from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("shift_config")) throw ValidationError("checkpoint has no shift network");
  auto p = ShiftNetParams<T>::zeros(shift_config_from_json(ck.meta["shift_config"]));
  ParamSet<T> set;
  p.collect(set);
  import_params(set, ck);
  return p;
}

template <typename T>
ModelParams<T> model_params_from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("model_config")) throw ValidationError("checkpoint has no dialogue model");
  auto p = ModelParams<T>::zeros(model_config_from_json(ck.meta["model_config"]));
  ParamSet<T> set;
  p.collect(set);
  import_params(set, ck);
  return p;
}

}  // namespace arcnet
