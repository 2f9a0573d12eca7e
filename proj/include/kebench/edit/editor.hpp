// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/edit/grace.hpp"
#include "kebench/edit/locate_edit.hpp"
#include "kebench/edit/lora.hpp"
#include "kebench/edit/null_space.hpp"

namespace kebench {

// Shared state the editors draw on; providers cache per model identity.
struct EditContext {
  std::shared_ptr<CovarianceProvider> covariance;
  std::shared_ptr<PreservedKeyProvider> preserved;
};

class Editor {
 public:
  virtual ~Editor() = default;
  virtual std::string name() const = 0;
  virtual nlohmann::json hyperparameters() const = 0;
  // Applies the requests as one edit. Methods without batch support apply
  // them one after another and merge the outcomes.
  virtual EditOutcome apply(TransformerModel& model, std::span<const EditRequest> requests) = 0;
};

// Known names: rome, memit, alphaedit, anyedit, lora, grace. `overrides`
// holds method hyperparameters (unknown keys are rejected):
//   all locate/value methods: value_steps, value_rate, value_weight_decay, value_stop_loss
//   anyedit: chunk_size          lora: rank, steps, rate, scale, seed
//   grace: epsilon
std::unique_ptr<Editor> make_editor(const std::string& name, const nlohmann::json& overrides,
                                    EditContext context);

const std::vector<std::string>& editor_names();

}  // namespace kebench
