// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "kebench/edit/locate_edit.hpp"

namespace kebench {

struct NullSpaceProjector {
  Matrix p;      // m x m
  int rank = 0;  // number of directions removed
};

// P = I - U_r U_r^T over left singular vectors of K0 whose singular value
// exceeds rank_tolerance * sigma_max. All-zero K0 gives the identity.
NullSpaceProjector compute_null_space_projector(const Matrix& k0, double rank_tolerance = 1e-6);

// Keys of preserved prompts at every position of prompt + its greedy
// continuation, computed on the model as first seen, with their projectors.
class PreservedKeyProvider {
 public:
  PreservedKeyProvider(std::vector<std::string> prompts, int continuation_tokens = 12,
                       double rank_tolerance = 1e-6);

  struct Entry {
    Matrix k0;
    NullSpaceProjector projector;
  };
  const Entry& get(const TransformerModel& model, int layer);
  const std::vector<std::string>& prompts() const { return prompts_; }
  int continuation_tokens() const { return continuation_; }

 private:
  std::vector<std::string> prompts_;
  int continuation_;
  double tolerance_;
  std::mutex mu_;
  std::map<std::pair<std::string, int>, std::unique_ptr<Entry>> cache_;
};

// Batched update restricted to the preserved null space: with K~ = P K,
// delta = R (K~^T C^-1 K~)^+ (C^-1 K~)^T P, so delta K0 = 0 while delta K = R
// wherever P keeps the key. P = I reduces to batch_delta; P = 0 gives zero.
Matrix projected_batch_delta(const Matrix& k, const Matrix& r, const LayerCovariance& c,
                             const NullSpaceProjector& proj);

EditOutcome edit_alphaedit(TransformerModel& model, std::span<const EditRequest> requests,
                           CovarianceProvider& cov, PreservedKeyProvider& preserved,
                           const ValueOptions& vopts = {});

}  // namespace kebench
