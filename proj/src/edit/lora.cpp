// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/lora.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "kebench/substrate/random.hpp"

namespace kebench {

void to_json(nlohmann::json& j, const LoraOptions& o) {
  j = {{"rank", o.rank}, {"steps", o.steps}, {"rate", o.rate}, {"scale", o.scale},
       {"seed", o.seed}};
}

EditOutcome edit_lora(TransformerModel& model, std::span<const EditRequest> requests,
                      const LoraOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (opts.rank < 1) throw ValidationError("LoRA rank must be at least 1");
  if (opts.steps < 0) throw ValidationError("LoRA steps must be non-negative");
  if (requests.empty()) throw ValidationError("edit batch is empty");
  const auto& arch = model.architecture();
  std::vector<TokenRequest> reqs;
  for (const auto& r : requests) reqs.push_back(tokenize_request(model, r));
  const LayerSpec& spec = requests[0].layers;

  Rng rng(opts.seed);
  std::vector<LoraFactors> factors;
  for (int layer : spec.layers) {
    LoraFactors f;
    f.layer = layer;
    f.scale = opts.scale;
    f.a.resize(arch.d_model, opts.rank);
    for (Eigen::Index j = 0; j < f.a.cols(); ++j)
      for (Eigen::Index i = 0; i < f.a.rows(); ++i) f.a(i, j) = rng.normal() / std::sqrt(opts.rank);
    f.b = Matrix::Zero(opts.rank, arch.d_mlp);
    factors.push_back(std::move(f));
  }
  std::vector<LoraGradient> m1(factors.size()), m2(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    m1[i] = m2[i] = {Matrix::Zero(arch.d_model, opts.rank), Matrix::Zero(opts.rank, arch.d_mlp)};
  }

  EditOutcome out;
  out.method = "lora";
  out.layers = spec.layers;
  out.hyperparameters = opts;

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double loss = 0.0;
  for (int step = 0; step <= opts.steps; ++step) {
    ForwardOptions fwd;
    fwd.lora = factors;
    std::vector<LoraGradient> grads(factors.size());
    for (auto& g : grads) g = {Matrix::Zero(arch.d_model, opts.rank), Matrix::Zero(opts.rank, arch.d_mlp)};
    loss = 0.0;
    for (const auto& r : reqs) {
      std::vector<int> seq = r.prompt;
      seq.insert(seq.end(), r.target.begin(), r.target.end());
      std::vector<int> pos(r.target.size());
      std::iota(pos.begin(), pos.end(), static_cast<int>(r.prompt.size()) - 1);
      const auto cache = model.forward(seq, fwd);
      SequenceLoss sl = sequence_nll(cache.logits, seq, pos);
      loss += sl.loss / static_cast<double>(reqs.size());
      if (step == opts.steps) continue;
      sl.d_logits /= static_cast<double>(reqs.size());
      BackwardOptions bo;
      bo.down_to_layer = spec.layers.front();
      bo.lora_grads = &grads;
      model.backward(cache, sl.d_logits, fwd, bo);
    }
    if (!std::isfinite(loss)) {
      throw EditorError(fmt::format("LoRA training diverged at step {}; weights untouched", step));
    }
    if (step == 0) out.diagnostics.nll_before = loss;
    if (step == opts.steps) break;
    const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
    auto adam = [&](Matrix& w, Matrix& s1, Matrix& s2, const Matrix& g) {
      s1 = b1 * s1 + (1 - b1) * g;
      s2 = b2 * s2 + (1 - b2) * g.cwiseProduct(g);
      w.array() -= opts.rate * (s1.array() / c1) / ((s2.array() / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < factors.size(); ++i) {
      adam(factors[i].a, m1[i].a, m2[i].a, grads[i].a);
      adam(factors[i].b, m1[i].b, m2[i].b, grads[i].b);
    }
  }
  for (const auto& f : factors) {
    if (!f.a.allFinite() || !f.b.allFinite()) throw EditorError("LoRA factors became non-finite");
  }
  for (const auto& f : factors) {
    model.add_to_weight(f.layer, Site::kMlpDown, f.scale * (f.a * f.b));
  }
  out.adapter = AdapterRecord{std::move(factors), loss, opts.steps};
  double after = 0.0;
  for (const auto& r : reqs) after += target_nll(model, r);
  out.diagnostics.nll_after = after / static_cast<double>(reqs.size());
  out.weight_hash = model.checksum();
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace kebench
