// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "kebench/edit/types.hpp"
#include "kebench/edit/value_optimizer.hpp"

namespace kebench {

struct LayerCovariance {
  Matrix c;
  Eigen::LDLT<Matrix> ldlt;
  double ridge = 0.0;
  std::size_t n_tokens = 0;
};

// Key second moments per (model identity, layer), computed on first use from
// the model as it is at that moment (normally the unedited model).
class CovarianceProvider {
 public:
  CovarianceProvider(std::vector<std::string> sample, CovarianceOptions opts = {});

  const LayerCovariance& get(const TransformerModel& model, int layer);
  // Pins an explicit covariance for a layer (any model).
  void set(int layer, const Matrix& c);

  const CovarianceOptions& options() const { return opts_; }

 private:
  std::vector<std::string> sample_;
  CovarianceOptions opts_;
  std::mutex mu_;
  std::map<std::pair<std::string, int>, std::unique_ptr<LayerCovariance>> cache_;
  std::map<int, std::unique_ptr<LayerCovariance>> pinned_;
};

// Rank-one update (v - W k) (C^-1 k)^T / (k^T C^-1 k). Throws EditorError when
// the denominator is below 1e-12.
Matrix rome_delta(const Matrix& w, const Vector& k, const Vector& v, const LayerCovariance& c);

// Minimum C-norm update with delta K = R exactly: R (K^T C^-1 K)^-1 K^T C^-1.
// With one key this is rome_delta. Throws EditorError when K^T C^-1 K is
// numerically singular.
Matrix batch_delta(const Matrix& k, const Matrix& r, const LayerCovariance& c);

EditOutcome edit_rome(TransformerModel& model, const EditRequest& request,
                      CovarianceProvider& cov, const ValueOptions& vopts = {});

EditOutcome edit_memit(TransformerModel& model, std::span<const EditRequest> requests,
                       CovarianceProvider& cov, const ValueOptions& vopts = {});

// Splits the target into token chunks; chunk j is edited with prompt + chunks
// before j as its prompt.
EditOutcome edit_anyedit(TransformerModel& model, const EditRequest& request, int chunk_size,
                         CovarianceProvider& cov, const ValueOptions& vopts = {});

namespace detail {

// Per-layer solve used by the batched editors; `project` may restrict the
// update (null-space editing).
using LayerSolver = std::function<Matrix(int layer, const Matrix& k, const Matrix& r,
                                         const LayerCovariance& c)>;

EditOutcome spread_edit(TransformerModel& model, std::span<const TokenRequest> requests,
                        const LayerSpec& spec, CovarianceProvider& cov, const ValueOptions& vopts,
                        const LayerSolver& solve, std::string method);

}  // namespace detail
}  // namespace kebench
