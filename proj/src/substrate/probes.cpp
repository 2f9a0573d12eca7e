// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/probes.hpp"

#include <fmt/format.h>

namespace kebench {

int PositionSelector::resolve(int n_tokens) const {
  if (!index) return n_tokens - 1;
  if (*index < 0 || *index >= n_tokens) {
    throw ValidationError(fmt::format("position {} out of range for {} tokens", *index, n_tokens));
  }
  return *index;
}

Matrix keys_at_layer(const TransformerModel& model, std::span<const int> tokens, int layer) {
  ForwardOptions opts;
  opts.last_layer = layer;
  return model.forward(tokens, opts).layers[layer].key;
}

KeyMatrix collect_keys(const TransformerModel& model, std::span<const ProbePrompt> prompts,
                       const ActivationProbe& probe) {
  if (probe.layer < 0 || probe.layer >= model.architecture().n_layers) {
    throw ValidationError(fmt::format("probe layer {} out of range", probe.layer));
  }
  KeyMatrix out;
  std::vector<Vector> cols;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    try {
      const auto tokens = model.prompt_tokens(prompts[i].text);
      const int pos = prompts[i].position.resolve(static_cast<int>(tokens.size()));
      cols.push_back(keys_at_layer(model, tokens, probe.layer).col(pos));
      out.source.push_back(i);
      out.positions.push_back(pos);
    } catch (const ValidationError& e) {
      out.errors.emplace_back(i, e.what());
    }
  }
  out.keys.resize(model.architecture().d_mlp, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.keys.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

double default_ridge(const Matrix& second_moment) {
  return 1e-4 * second_moment.trace() / static_cast<double>(second_moment.rows());
}

Matrix key_covariance(const Matrix& keys, double ridge) {
  if (ridge < 0.0) throw ValidationError("ridge must be non-negative");
  const Eigen::Index m = keys.rows();
  Matrix c = Matrix::Zero(m, m);
  if (keys.cols() > 0) c = keys * keys.transpose() / static_cast<double>(keys.cols());
  if (ridge == 0.0 && c.cwiseAbs().maxCoeff() == 0.0) {
    throw EditorError("key covariance is singular (all keys are zero); use a positive ridge");
  }
  c.diagonal().array() += ridge;
  return c;
}

CovarianceEstimate estimate_key_covariance(const TransformerModel& model,
                                           std::span<const std::string> corpus_sample, int layer,
                                           const CovarianceOptions& opts) {
  if (corpus_sample.empty()) throw ValidationError("covariance sample is empty");
  const int window = model.architecture().context_window;
  const Eigen::Index m = model.architecture().d_mlp;
  Matrix sum = Matrix::Zero(m, m);
  std::size_t n = 0;
  for (const auto& text : corpus_sample) {
    if (n >= opts.max_tokens) break;
    const auto body = model.tokenizer().encode(text);
    for (std::size_t start = 0; start < body.size() && n < opts.max_tokens;
         start += static_cast<std::size_t>(window - 1)) {
      const std::size_t len = std::min({body.size() - start, static_cast<std::size_t>(window - 1),
                                        opts.max_tokens - n});
      std::vector<int> chunk{Tokenizer::kBos};
      chunk.insert(chunk.end(), body.begin() + static_cast<std::ptrdiff_t>(start),
                   body.begin() + static_cast<std::ptrdiff_t>(start + len));
      const Matrix keys = keys_at_layer(model, chunk, layer).rightCols(static_cast<Eigen::Index>(len));
      sum.noalias() += keys * keys.transpose();
      n += len;
    }
  }
  CovarianceEstimate est;
  est.n_tokens = n;
  const Matrix second = sum / static_cast<double>(n);
  est.ridge = opts.ridge < 0.0 ? default_ridge(second) : opts.ridge;
  if (est.ridge == 0.0 && second.cwiseAbs().maxCoeff() == 0.0) {
    throw EditorError("key covariance is singular (all keys are zero); use a positive ridge");
  }
  est.c = second;
  est.c.diagonal().array() += est.ridge;
  return est;
}

}  // namespace kebench
