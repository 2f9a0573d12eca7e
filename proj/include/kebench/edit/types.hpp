// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/substrate/probes.hpp"
#include "kebench/substrate/transformer.hpp"

namespace kebench {

// Strictly increasing, non-empty list of layers to edit.
struct LayerSpec {
  std::vector<int> layers;

  // Layers 4..8, the default for full-size models.
  static LayerSpec standard() { return {{4, 5, 6, 7, 8}}; }
  // Throws ValidationError naming the offending index.
  void validate(const Architecture& arch) const;
  int midpoint() const { return layers[layers.size() / 2]; }
  std::string describe() const;
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);

struct EditRequest {
  std::string prompt;
  std::string target;
  LayerSpec layers;
  PositionSelector key_position = PositionSelector::last();
  std::string paradigm;  // diagnostic tag only
};

// Token form of a request: BOS + prompt, and the target as a continuation.
struct TokenRequest {
  std::vector<int> prompt;
  std::vector<int> target;
  int key_position = 0;
};

TokenRequest tokenize_request(const TransformerModel& model, const EditRequest& r);

// Mean target NLL given the prompt (teacher forced).
double target_nll(const TransformerModel& model, const TokenRequest& r);

// Per-layer additive update of the down-projection. apply() records the exact
// weights before and after, so the inverse restores them bit-for-bit even
// though floating-point subtraction does not undo addition.
class WeightDelta {
 public:
  std::map<int, Matrix> deltas;

  // Adds each delta. A delta produced by inverse() instead writes the recorded
  // weights when the model still holds the post-apply values.
  void apply(TransformerModel& model);
  WeightDelta inverse() const;
  double frobenius_norm() const;
  // Folds in an already-applied delta (possibly touching the same layers).
  void absorb(const WeightDelta& applied);

 private:
  std::map<int, Matrix> before_, after_;
  std::map<int, Matrix> exact_from_, exact_to_;
};

struct CodebookMutation {
  int layer = 0;
  std::vector<std::size_t> inserted;  // entry indices
  std::vector<std::size_t> replaced;
  // (entry index, old radius, new radius)
  std::vector<std::tuple<std::size_t, double, double>> shrunk;
};

struct AdapterRecord {
  std::vector<LoraFactors> factors;
  double final_loss = 0.0;
  int steps = 0;
};

struct EditDiagnostics {
  double nll_before = 0.0;
  double nll_after = 0.0;
  double solve_residual = 0.0;  // max relative ||dK - R|| over solves
  int value_steps = 0;
  bool converged = true;
  std::vector<std::string> warnings;
};

struct EditOutcome {
  std::string method;
  nlohmann::json hyperparameters;
  std::vector<int> layers;
  std::optional<WeightDelta> weight_delta;
  std::optional<CodebookMutation> codebook;
  std::optional<AdapterRecord> adapter;
  EditDiagnostics diagnostics;
  double wall_ms = 0.0;
  std::string weight_hash;

  nlohmann::json to_json() const;
};

}  // namespace kebench
