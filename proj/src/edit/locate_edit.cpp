// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/locate_edit.hpp"

#include <chrono>

#include <fmt/format.h>

namespace kebench {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vector key_vector(const TransformerModel& model, const TokenRequest& r, int layer) {
  return keys_at_layer(model, r.prompt, layer).col(r.key_position);
}

Vector layer_state(const TransformerModel& model, const TokenRequest& r, int layer) {
  ForwardOptions opts;
  opts.last_layer = layer;
  return model.forward(r.prompt, opts).layers[layer].x_out.col(r.key_position);
}

double mean_nll(const TransformerModel& model, std::span<const TokenRequest> reqs) {
  double s = 0.0;
  for (const auto& r : reqs) s += target_nll(model, r);
  return s / static_cast<double>(reqs.size());
}

std::unique_ptr<LayerCovariance> factor(Matrix c, double ridge, std::size_t n) {
  auto out = std::make_unique<LayerCovariance>();
  out->c = std::move(c);
  out->ldlt.compute(out->c);
  if (out->ldlt.info() != Eigen::Success || !out->ldlt.isPositive() ||
      out->ldlt.vectorD().minCoeff() <= 0.0) {
    throw EditorError("key covariance is not positive definite; increase the ridge");
  }
  out->ridge = ridge;
  out->n_tokens = n;
  return out;
}

std::vector<TokenRequest> tokenize_all(const TransformerModel& model,
                                       std::span<const EditRequest> requests) {
  if (requests.empty()) throw ValidationError("edit batch is empty");
  std::vector<TokenRequest> out;
  for (const auto& r : requests) {
    if (r.layers.layers != requests[0].layers.layers) {
      throw ValidationError("all requests in a batch must share one layer spec");
    }
    out.push_back(tokenize_request(model, r));
  }
  return out;
}

}  // namespace

CovarianceProvider::CovarianceProvider(std::vector<std::string> sample, CovarianceOptions opts)
    : sample_(std::move(sample)), opts_(opts) {}

const LayerCovariance& CovarianceProvider::get(const TransformerModel& model, int layer) {
  std::lock_guard lock(mu_);
  if (auto it = pinned_.find(layer); it != pinned_.end()) return *it->second;
  const auto key = std::make_pair(model.identity(), layer);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    const auto est = estimate_key_covariance(model, sample_, layer, opts_);
    it = cache_.emplace(key, factor(est.c, est.ridge, est.n_tokens)).first;
  }
  return *it->second;
}

void CovarianceProvider::set(int layer, const Matrix& c) {
  std::lock_guard lock(mu_);
  pinned_[layer] = factor(c, 0.0, 0);
}

Matrix rome_delta(const Matrix& w, const Vector& k, const Vector& v, const LayerCovariance& c) {
  const Vector cinv_k = c.ldlt.solve(k);
  const double denom = k.dot(cinv_k);
  if (!(denom >= 1e-12)) {
    throw EditorError(fmt::format("degenerate edit key: k^T C^-1 k = {:.3e}", denom));
  }
  return (v - w * k) * cinv_k.transpose() / denom;
}

Matrix batch_delta(const Matrix& k, const Matrix& r, const LayerCovariance& c) {
  const Matrix cinv_k = c.ldlt.solve(k);
  const Matrix g = k.transpose() * cinv_k;
  Eigen::LDLT<Matrix> g_ldlt(g);
  const double scale = g.diagonal().cwiseAbs().maxCoeff();
  if (g_ldlt.info() != Eigen::Success || !(scale > 1e-12) ||
      !(g_ldlt.vectorD().cwiseAbs().minCoeff() > 1e-12 * scale)) {
    throw EditorError(
        "key system K^T C^-1 K is numerically singular (duplicate or degenerate keys); "
        "increase the covariance ridge");
  }
  return r * g_ldlt.solve(cinv_k.transpose());
}

namespace detail {

EditOutcome spread_edit(TransformerModel& model, std::span<const TokenRequest> requests,
                        const LayerSpec& spec, CovarianceProvider& cov, const ValueOptions& vopts,
                        const LayerSolver& solve, std::string method) {
  const auto t0 = Clock::now();
  spec.validate(model.architecture());
  const int top = spec.layers.back();
  const auto n = static_cast<Eigen::Index>(requests.size());
  const int d = model.architecture().d_model;
  const int m = model.architecture().d_mlp;

  EditOutcome out;
  out.method = std::move(method);
  out.layers = spec.layers;
  out.diagnostics.nll_before = mean_nll(model, requests);

  Matrix z(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const TargetValue tv = compute_target_value(model, top, requests[j], vopts);
    z.col(j) = tv.state;
    out.diagnostics.value_steps += tv.steps;
    if (!tv.converged) {
      out.diagnostics.converged = false;
      out.diagnostics.warnings.push_back(fmt::format(
          "value optimization for request {} stopped at loss {:.4f}", j, tv.loss_after));
    }
  }

  WeightDelta total;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const int layer = spec.layers[i];
    Matrix keys(m, n), cur(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      keys.col(j) = key_vector(model, requests[j], layer);
      cur.col(j) = layer_state(model, requests[j], top);
    }
    const Matrix r = (z - cur) / static_cast<double>(spec.layers.size() - i);
    const LayerCovariance& c = cov.get(model, layer);
    Matrix delta = solve(layer, keys, r, c);
    if (!delta.allFinite()) throw EditorError(fmt::format("non-finite update at layer {}", layer));
    const double rn = r.norm();
    if (rn > 0.0) {
      out.diagnostics.solve_residual =
          std::max(out.diagnostics.solve_residual, (delta * keys - r).norm() / rn);
    }
    WeightDelta step;
    step.deltas[layer] = std::move(delta);
    step.apply(model);
    total.absorb(step);
  }
  out.weight_delta = std::move(total);
  out.diagnostics.nll_after = mean_nll(model, requests);
  out.weight_hash = model.checksum();
  out.wall_ms = elapsed_ms(t0);
  return out;
}

}  // namespace detail

EditOutcome edit_rome(TransformerModel& model, const EditRequest& request,
                      CovarianceProvider& cov, const ValueOptions& vopts) {
  const auto t0 = Clock::now();
  if (request.layers.layers.size() != 1) {
    throw ValidationError("rank-one editing needs exactly one layer, got " +
                          request.layers.describe());
  }
  const TokenRequest r = tokenize_request(model, request);
  const int layer = request.layers.layers[0];
  EditOutcome out;
  out.method = "rome";
  out.layers = request.layers.layers;
  out.hyperparameters = {{"value", vopts}, {"ridge", cov.get(model, layer).ridge}};
  out.diagnostics.nll_before = target_nll(model, r);
  const TargetValue tv = compute_target_value(model, layer, r, vopts);
  out.diagnostics.value_steps = tv.steps;
  if (!tv.converged) {
    out.diagnostics.converged = false;
    out.diagnostics.warnings.push_back(
        fmt::format("value optimization stopped at loss {:.4f}", tv.loss_after));
  }
  const Vector k = key_vector(model, r, layer);
  const Matrix w = model.get_weight(layer, Site::kMlpDown);
  WeightDelta delta;
  delta.deltas[layer] = rome_delta(w, k, tv.value, cov.get(model, layer));
  const Vector want = tv.value - w * k;
  if (want.norm() > 0.0) {
    out.diagnostics.solve_residual = (delta.deltas[layer] * k - want).norm() / want.norm();
  }
  delta.apply(model);
  out.weight_delta = std::move(delta);
  out.diagnostics.nll_after = target_nll(model, r);
  out.weight_hash = model.checksum();
  out.wall_ms = elapsed_ms(t0);
  return out;
}

EditOutcome edit_memit(TransformerModel& model, std::span<const EditRequest> requests,
                       CovarianceProvider& cov, const ValueOptions& vopts) {
  const auto reqs = tokenize_all(model, requests);
  auto out = detail::spread_edit(
      model, reqs, requests[0].layers, cov, vopts,
      [](int, const Matrix& k, const Matrix& r, const LayerCovariance& c) {
        return batch_delta(k, r, c);
      },
      "memit");
  out.hyperparameters = {{"value", vopts}, {"residual_spread", "uniform"}};
  return out;
}

EditOutcome edit_anyedit(TransformerModel& model, const EditRequest& request, int chunk_size,
                         CovarianceProvider& cov, const ValueOptions& vopts) {
  const auto t0 = Clock::now();
  if (chunk_size < 1) throw ValidationError("chunk size must be at least 1");
  const TokenRequest full = tokenize_request(model, request);
  const std::size_t cs = static_cast<std::size_t>(chunk_size);
  EditOutcome out;
  out.method = "anyedit";
  out.layers = request.layers.layers;
  out.hyperparameters = {{"value", vopts}, {"chunk_size", chunk_size}};
  out.diagnostics.nll_before = target_nll(model, full);
  WeightDelta total;
  int chunk = 0;
  for (std::size_t start = 0; start < full.target.size(); start += cs, ++chunk) {
    TokenRequest sub;
    sub.prompt = full.prompt;
    sub.prompt.insert(sub.prompt.end(), full.target.begin(),
                      full.target.begin() + static_cast<std::ptrdiff_t>(start));
    sub.target.assign(full.target.begin() + static_cast<std::ptrdiff_t>(start),
                      full.target.begin() +
                          static_cast<std::ptrdiff_t>(std::min(start + cs, full.target.size())));
    sub.key_position = start == 0 ? full.key_position : static_cast<int>(sub.prompt.size()) - 1;
    try {
      auto part = detail::spread_edit(
          model, std::span(&sub, 1), request.layers, cov, vopts,
          [](int, const Matrix& k, const Matrix& r, const LayerCovariance& c) {
            return batch_delta(k, r, c);
          },
          "anyedit");
      total.absorb(*part.weight_delta);
      out.diagnostics.value_steps += part.diagnostics.value_steps;
      out.diagnostics.solve_residual =
          std::max(out.diagnostics.solve_residual, part.diagnostics.solve_residual);
      if (!part.diagnostics.converged) {
        out.diagnostics.converged = false;
        out.diagnostics.warnings.push_back(fmt::format("chunk {}: value optimization did not converge", chunk));
      }
    } catch (const EditorError& e) {
      throw EditorError(fmt::format("chunk {}: {}", chunk, e.what()));
    }
  }
  out.hyperparameters["chunks"] = chunk;
  out.weight_delta = std::move(total);
  out.diagnostics.nll_after = target_nll(model, full);
  out.weight_hash = model.checksum();
  out.wall_ms = elapsed_ms(t0);
  return out;
}

}  // namespace kebench
