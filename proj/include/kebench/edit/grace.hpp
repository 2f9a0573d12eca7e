// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kebench/edit/types.hpp"
#include "kebench/edit/value_optimizer.hpp"

namespace kebench {

struct GraceOptions {
  double epsilon = 1.0;
  ValueOptions value{};
};

// Inserts `entry` with radius epsilon. A key within epsilon of an entry with a
// different target halves the distance into both radii; at distance 0 the old
// entry is replaced. Throws ValidationError for epsilon <= 0.
CodebookMutation insert_codebook_entry(CodebookAdaptor& adaptor, CodebookEntry entry,
                                       double epsilon);

// Value of the nearest covering entry, else the hidden state unchanged.
Vector grace_infer_hook(const CodebookAdaptor& adaptor, const Vector& hidden);

// Keys on the MLP output at the spec's midpoint layer for the last prompt
// token; the value is optimized so the target decodes.
EditOutcome edit_grace(TransformerModel& model, const EditRequest& request,
                       const GraceOptions& opts = {});

}  // namespace kebench
