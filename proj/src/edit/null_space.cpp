// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/null_space.hpp"

#include <Eigen/SVD>

#include <fmt/format.h>

namespace kebench {

NullSpaceProjector compute_null_space_projector(const Matrix& k0, double rank_tolerance) {
  const Eigen::Index m = k0.rows();
  NullSpaceProjector out;
  out.p = Matrix::Identity(m, m);
  if (k0.cols() == 0 || k0.cwiseAbs().maxCoeff() == 0.0) return out;
  Eigen::BDCSVD<Matrix> svd(k0, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double cut = rank_tolerance * s(0);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  const auto u = svd.matrixU().leftCols(r);
  out.p -= u * u.transpose();
  out.rank = static_cast<int>(r);
  return out;
}

PreservedKeyProvider::PreservedKeyProvider(std::vector<std::string> prompts,
                                           int continuation_tokens, double rank_tolerance)
    : prompts_(std::move(prompts)), continuation_(continuation_tokens), tolerance_(rank_tolerance) {
  if (prompts_.empty()) throw ValidationError("null-space editing needs preserved prompts");
}

const PreservedKeyProvider::Entry& PreservedKeyProvider::get(const TransformerModel& model,
                                                             int layer) {
  std::lock_guard lock(mu_);
  const auto key = std::make_pair(model.identity(), layer);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;
  std::vector<Matrix> blocks;
  Eigen::Index cols = 0;
  for (const auto& text : prompts_) {
    std::vector<int> tokens = model.prompt_tokens(text);
    if (continuation_ > 0) {
      GenerationOptions g;
      g.max_tokens = continuation_;
      const auto more = model.generate_tokens(tokens, g);
      tokens.insert(tokens.end(), more.begin(), more.end());
    }
    blocks.push_back(keys_at_layer(model, tokens, layer));
    cols += blocks.back().cols();
  }
  auto entry = std::make_unique<Entry>();
  entry->k0.resize(model.architecture().d_mlp, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    entry->k0.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  entry->projector = compute_null_space_projector(entry->k0, tolerance_);
  return *cache_.emplace(key, std::move(entry)).first->second;
}

Matrix projected_batch_delta(const Matrix& k, const Matrix& r, const LayerCovariance& c,
                             const NullSpaceProjector& proj) {
  if (proj.rank == 0) return batch_delta(k, r, c);
  const Matrix kp = proj.p * k;
  const Matrix cinv_kp = c.ldlt.solve(kp);
  const Matrix g = kp.transpose() * cinv_kp;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  const Vector& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (top > 0.0 && ev(i) > 1e-10 * top) inv(i) = 1.0 / ev(i);
  }
  const Matrix g_pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return r * g_pinv * cinv_kp.transpose() * proj.p;
}

EditOutcome edit_alphaedit(TransformerModel& model, std::span<const EditRequest> requests,
                           CovarianceProvider& cov, PreservedKeyProvider& preserved,
                           const ValueOptions& vopts) {
  if (requests.empty()) throw ValidationError("edit batch is empty");
  std::vector<TokenRequest> reqs;
  for (const auto& r : requests) {
    if (r.layers.layers != requests[0].layers.layers) {
      throw ValidationError("all requests in a batch must share one layer spec");
    }
    reqs.push_back(tokenize_request(model, r));
  }
  // Preserved keys come from the model before this edit touches any layer.
  std::map<int, const PreservedKeyProvider::Entry*> entries;
  nlohmann::json ranks = nlohmann::json::object();
  for (int layer : requests[0].layers.layers) {
    entries[layer] = &preserved.get(model, layer);
    ranks[std::to_string(layer)] = entries[layer]->projector.rank;
  }
  auto out = detail::spread_edit(
      model, reqs, requests[0].layers, cov, vopts,
      [&](int layer, const Matrix& k, const Matrix& r, const LayerCovariance& c) {
        return projected_batch_delta(k, r, c, entries.at(layer)->projector);
      },
      "alphaedit");
  out.hyperparameters = {{"value", vopts},
                         {"preserved_prompts", preserved.prompts().size()},
                         {"continuation_tokens", preserved.continuation_tokens()},
                         {"projector_rank", ranks}};
  return out;
}

}  // namespace kebench
