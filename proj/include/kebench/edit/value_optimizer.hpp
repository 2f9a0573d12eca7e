// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kebench/edit/types.hpp"

namespace kebench {

struct ValueOptions {
  int steps = 25;
  double rate = 0.5;
  double weight_decay = 1e-3;
  // Optimization stops once the target NLL drops below this.
  double stop_loss = 0.05;
};

void to_json(nlohmann::json& j, const ValueOptions& o);

struct TargetValue {
  Vector base;     // unmodified MLP output at the key position
  Vector delta;    // optimized shift
  Vector value;    // v* = base + delta
  Vector state;    // layer output at the key position with the shift applied
  int steps = 0;   // improvement steps taken
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool converged = true;
};

// Adam on a shift of the MLP output at (layer, key position) minimizing the
// target NLL plus weight_decay * ||delta||^2. Returns the best iterate; when
// the whole target is already the argmax continuation the shift stays zero.
// Throws EditorError on a non-finite loss.
TargetValue compute_target_value(const TransformerModel& model, int layer,
                                 const TokenRequest& request, const ValueOptions& opts = {});

}  // namespace kebench
