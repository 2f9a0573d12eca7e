// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "kebench/edit/types.hpp"

namespace kebench {

struct LoraOptions {
  int rank = 8;
  int steps = 60;
  double rate = 1e-3;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const LoraOptions& o);

// Trains factors A (d x r, random) and B (r x m, zero) on every layer of the
// spec with Adam on the mean target NLL, then merges A B into the weights.
// A non-finite loss aborts before any weight is touched.
EditOutcome edit_lora(TransformerModel& model, std::span<const EditRequest> requests,
                      const LoraOptions& opts = {});

}  // namespace kebench
