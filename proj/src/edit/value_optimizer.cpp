// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/value_optimizer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace kebench {

void to_json(nlohmann::json& j, const ValueOptions& o) {
  j = {{"steps", o.steps},
       {"rate", o.rate},
       {"weight_decay", o.weight_decay},
       {"stop_loss", o.stop_loss}};
}

TargetValue compute_target_value(const TransformerModel& model, int layer,
                                 const TokenRequest& request, const ValueOptions& opts) {
  if (opts.steps < 0) throw ValidationError("value optimization steps must be >= 0");
  if (request.target.empty()) throw ValidationError("edit target has no tokens");
  std::vector<int> seq = request.prompt;
  seq.insert(seq.end(), request.target.begin(), request.target.end());
  std::vector<int> positions(request.target.size());
  std::iota(positions.begin(), positions.end(), static_cast<int>(request.prompt.size()) - 1);
  const int p = request.key_position;
  const int d = model.architecture().d_model;

  ValueShift shift{layer, p, Vector::Zero(d)};
  ForwardOptions fwd;
  fwd.shift = &shift;
  BackwardOptions bwd;
  bwd.down_to_layer = layer;

  TargetValue out;
  Vector best = shift.delta;
  double best_obj = 0.0;
  Vector m1 = Vector::Zero(d), m2 = Vector::Zero(d);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  for (int step = 0;; ++step) {
    const ForwardCache cache = model.forward(seq, fwd);
    const SequenceLoss sl = sequence_nll(cache.logits, seq, positions);
    const double obj = sl.loss + opts.weight_decay * shift.delta.squaredNorm();
    if (!std::isfinite(obj)) {
      throw EditorError(fmt::format("value optimization diverged at step {} (loss {})", step,
                                    sl.loss));
    }
    if (step == 0) {
      const auto& lc = cache.layers[layer];
      out.base = lc.mlp_raw.col(p);
      out.loss_before = sl.loss;
      out.loss_after = sl.loss;
      best_obj = obj;
      if (sl.all_argmax && sl.loss < opts.stop_loss) break;
    } else if (obj < best_obj) {
      best_obj = obj;
      best = shift.delta;
      out.loss_after = sl.loss;
      out.steps = step;
    }
    if (sl.loss < opts.stop_loss || step >= opts.steps) break;

    const BackwardResult br = model.backward(cache, sl.d_logits, fwd, bwd);
    const Vector g = br.d_x_out[layer].col(p) + 2.0 * opts.weight_decay * shift.delta;
    m1 = b1 * m1 + (1 - b1) * g;
    m2 = b2 * m2 + (1 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
    shift.delta -= (opts.rate * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
  }

  out.delta = best;
  out.value = out.base + best;
  out.converged = out.loss_after < opts.stop_loss;
  shift.delta = best;
  ForwardOptions probe = fwd;
  probe.last_layer = layer;
  out.state = model.forward(request.prompt, probe).layers[layer].x_out.col(p);
  return out;
}

}  // namespace kebench
