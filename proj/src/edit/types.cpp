// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/types.hpp"

#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace kebench {

void LayerSpec::validate(const Architecture& arch) const {
  if (layers.empty()) throw ValidationError("layer spec is empty");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] < 0 || layers[i] >= arch.n_layers) {
      throw ValidationError(fmt::format("layer {} is outside 0..{} for this model", layers[i],
                                        arch.n_layers - 1));
    }
    if (i > 0 && layers[i] <= layers[i - 1]) {
      throw ValidationError("layer spec must be strictly increasing: " + describe());
    }
  }
}

std::string LayerSpec::describe() const { return fmt::format("[{}]", fmt::join(layers, ",")); }

void to_json(nlohmann::json& j, const LayerSpec& s) { j = s.layers; }
void from_json(const nlohmann::json& j, LayerSpec& s) { s.layers = j.get<std::vector<int>>(); }

TokenRequest tokenize_request(const TransformerModel& model, const EditRequest& r) {
  r.layers.validate(model.architecture());
  TokenRequest t;
  t.prompt = model.prompt_tokens(r.prompt);
  t.target = model.tokenizer().encode(r.target, true);
  model.check_window(t.prompt.size() + t.target.size());
  t.key_position = r.key_position.resolve(static_cast<int>(t.prompt.size()));
  return t;
}

double target_nll(const TransformerModel& model, const TokenRequest& r) {
  std::vector<int> seq = r.prompt;
  seq.insert(seq.end(), r.target.begin(), r.target.end());
  std::vector<int> positions(r.target.size());
  std::iota(positions.begin(), positions.end(), static_cast<int>(r.prompt.size()) - 1);
  const auto cache = model.forward(seq);
  return sequence_nll(cache.logits, seq, positions).loss;
}

void WeightDelta::apply(TransformerModel& model) {
  before_.clear();
  after_.clear();
  for (const auto& [layer, d] : deltas) {
    Matrix w = model.get_weight(layer, Site::kMlpDown);
    before_[layer] = w;
    auto from = exact_from_.find(layer);
    if (from != exact_from_.end() && w == from->second) {
      model.set_weight(layer, Site::kMlpDown, exact_to_.at(layer));
    } else {
      model.add_to_weight(layer, Site::kMlpDown, d);
    }
    after_[layer] = model.get_weight(layer, Site::kMlpDown);
  }
}

WeightDelta WeightDelta::inverse() const {
  WeightDelta inv;
  for (const auto& [layer, d] : deltas) inv.deltas[layer] = -d;
  inv.exact_from_ = after_;
  inv.exact_to_ = before_;
  return inv;
}

void WeightDelta::absorb(const WeightDelta& applied) {
  for (const auto& [layer, d] : applied.deltas) {
    auto it = deltas.find(layer);
    if (it == deltas.end()) {
      deltas[layer] = d;
      before_[layer] = applied.before_.at(layer);
    } else {
      it->second += d;
    }
    after_[layer] = applied.after_.at(layer);
  }
}

double WeightDelta::frobenius_norm() const {
  double s = 0.0;
  for (const auto& [layer, d] : deltas) s += d.squaredNorm();
  return std::sqrt(s);
}

nlohmann::json EditOutcome::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["hyperparameters"] = hyperparameters;
  j["layers"] = layers;
  nlohmann::json d;
  d["nll_before"] = diagnostics.nll_before;
  d["nll_after"] = diagnostics.nll_after;
  d["solve_residual"] = diagnostics.solve_residual;
  d["value_steps"] = diagnostics.value_steps;
  d["converged"] = diagnostics.converged;
  d["warnings"] = diagnostics.warnings;
  j["diagnostics"] = d;
  if (weight_delta) {
    nlohmann::json norms = nlohmann::json::object();
    for (const auto& [layer, m] : weight_delta->deltas) norms[std::to_string(layer)] = m.norm();
    j["weight_delta"] = {{"frobenius_by_layer", norms}};
  }
  if (codebook) {
    nlohmann::json shrunk = nlohmann::json::array();
    for (const auto& [idx, from, to] : codebook->shrunk) shrunk.push_back({idx, from, to});
    j["codebook"] = {{"layer", codebook->layer},
                     {"inserted", codebook->inserted},
                     {"replaced", codebook->replaced},
                     {"shrunk", shrunk}};
  }
  if (adapter) {
    j["adapter"] = {{"rank", adapter->factors.empty() ? 0 : adapter->factors[0].a.cols()},
                    {"layers", adapter->factors.size()},
                    {"final_loss", adapter->final_loss},
                    {"steps", adapter->steps}};
  }
  j["wall_ms"] = wall_ms;
  j["weight_hash"] = weight_hash;
  return j;
}

}  // namespace kebench
