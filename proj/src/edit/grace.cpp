// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/grace.hpp"

#include <chrono>

#include <fmt/format.h>

namespace kebench {

CodebookMutation insert_codebook_entry(CodebookAdaptor& adaptor, CodebookEntry entry,
                                       double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("deferral radius must be positive");
  if (!entry.key.allFinite() || !entry.value.allFinite()) {
    throw EditorError("codebook key or value is not finite");
  }
  CodebookMutation mut;
  mut.layer = adaptor.layer;
  entry.radius = epsilon;
  for (std::size_t i = 0; i < adaptor.entries.size(); ++i) {
    auto& e = adaptor.entries[i];
    const double dist = (entry.key - e.key).norm();
    if (dist == 0.0) {
      e.value = entry.value;
      e.target = entry.target;
      e.radius = epsilon;
      mut.replaced.push_back(i);
      return mut;
    }
    if (e.target != entry.target && dist <= epsilon) {
      const double half = dist / 2.0;
      if (e.radius > half) {
        mut.shrunk.emplace_back(i, e.radius, half);
        e.radius = half;
      }
      entry.radius = std::min(entry.radius, half);
    }
  }
  adaptor.entries.push_back(std::move(entry));
  mut.inserted.push_back(adaptor.entries.size() - 1);
  return mut;
}

Vector grace_infer_hook(const CodebookAdaptor& adaptor, const Vector& hidden) {
  return adaptor.apply(hidden);
}

EditOutcome edit_grace(TransformerModel& model, const EditRequest& request,
                       const GraceOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(opts.epsilon > 0.0)) throw ValidationError("deferral radius must be positive");
  const TokenRequest r = tokenize_request(model, request);
  const int layer = request.layers.midpoint();
  if (model.adaptor() && model.adaptor()->layer != layer) {
    throw ValidationError(fmt::format("codebook adaptor lives at layer {}, request asks for {}",
                                      model.adaptor()->layer, layer));
  }
  EditOutcome out;
  out.method = "grace";
  out.layers = {layer};
  out.hyperparameters = {{"epsilon", opts.epsilon}, {"value", opts.value}, {"adaptor_layer", layer}};
  out.diagnostics.nll_before = target_nll(model, r);
  const TargetValue tv = compute_target_value(model, layer, r, opts.value);
  out.diagnostics.value_steps = tv.steps;
  if (!tv.converged) {
    out.diagnostics.converged = false;
    out.diagnostics.warnings.push_back(
        fmt::format("value optimization stopped at loss {:.4f}", tv.loss_after));
  }
  CodebookEntry entry{tv.base, tv.value, opts.epsilon, request.target};
  out.codebook = insert_codebook_entry(model.ensure_adaptor(layer), std::move(entry), opts.epsilon);
  out.diagnostics.nll_after = target_nll(model, r);
  out.weight_hash = model.checksum();
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace kebench
