// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

// Central-difference checks of the analytic backward pass.

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "kebench/substrate/random.hpp"
#include "test_util.hpp"

namespace kebench {
namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-6;

struct Problem {
  TransformerModel model = testing::tiny_model(17, 2, 8, 16);
  std::vector<int> tokens;
  std::vector<int> positions;

  Problem() {
    tokens = model.prompt_tokens("Doctors treat fever with aspirin.");
    for (int i = 0; i + 1 < static_cast<int>(tokens.size()); ++i) positions.push_back(i);
  }

  double loss(const ForwardOptions& fwd = {}) const {
    const auto cache = model.forward(tokens, fwd);
    return sequence_nll(cache.logits, tokens, positions).loss;
  }
};

// |a - n| / max(1, |a|, |n|)
double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

double central(double& x, const std::function<double()>& f) {
  const double keep = x;
  x = keep + kStep;
  const double up = f();
  x = keep - kStep;
  const double down = f();
  x = keep;
  return (up - down) / (2 * kStep);
}

TEST(Gradient, ParametersMatchFiniteDifferences) {
  Problem s;
  const auto cache = s.model.forward(s.tokens);
  const auto sl = sequence_nll(cache.logits, s.tokens, s.positions);
  Parameters grad = Parameters::zeros(s.model.architecture());
  BackwardOptions bo;
  bo.param_grads = &grad;
  s.model.backward(cache, sl.d_logits, {}, bo);

  auto params = s.model.mutable_parameters().buffers();
  auto grads = grad.buffers();
  ASSERT_EQ(params.size(), grads.size());
  Rng rng(3);
  int checked = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    // Every tensor, a handful of coordinates each.
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = rng.below(params[b].size());
      const double numeric = central(params[b][i], [&] { return s.loss(); });
      EXPECT_LT(rel_err(grads[b][i], numeric), kTol) << "buffer " << b << " index " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Gradient, ValueShiftMatchesLayerOutputGradient) {
  Problem s;
  const int layer = 0;
  const int pos = static_cast<int>(s.tokens.size()) - 3;
  ValueShift shift{layer, pos, Vector::Zero(s.model.architecture().d_model)};
  Rng rng(5);
  for (Eigen::Index i = 0; i < shift.delta.size(); ++i) shift.delta(i) = 0.1 * rng.normal();
  ForwardOptions fwd;
  fwd.shift = &shift;
  const auto cache = s.model.forward(s.tokens, fwd);
  const auto sl = sequence_nll(cache.logits, s.tokens, s.positions);
  BackwardOptions bo;
  bo.down_to_layer = layer;
  const auto br = s.model.backward(cache, sl.d_logits, fwd, bo);
  for (Eigen::Index i = 0; i < shift.delta.size(); ++i) {
    const double numeric = central(shift.delta(i), [&] { return s.loss(fwd); });
    EXPECT_LT(rel_err(br.d_x_out[layer](i, pos), numeric), kTol) << "component " << i;
  }
}

TEST(Gradient, LoraFactorsMatchFiniteDifferences) {
  Problem s;
  const auto& a = s.model.architecture();
  Rng rng(9);
  std::vector<LoraFactors> lora(1);
  lora[0].layer = 1;
  lora[0].a = Matrix(a.d_model, 2);
  lora[0].b = Matrix(2, a.d_mlp);
  lora[0].scale = 0.7;
  for (Eigen::Index i = 0; i < lora[0].a.size(); ++i) lora[0].a.data()[i] = 0.2 * rng.normal();
  for (Eigen::Index i = 0; i < lora[0].b.size(); ++i) lora[0].b.data()[i] = 0.2 * rng.normal();
  ForwardOptions fwd;
  fwd.lora = lora;
  const auto cache = s.model.forward(s.tokens, fwd);
  const auto sl = sequence_nll(cache.logits, s.tokens, s.positions);
  std::vector<LoraGradient> grads(1);
  grads[0].a = Matrix::Zero(lora[0].a.rows(), lora[0].a.cols());
  grads[0].b = Matrix::Zero(lora[0].b.rows(), lora[0].b.cols());
  BackwardOptions bo;
  bo.down_to_layer = 1;
  bo.lora_grads = &grads;
  s.model.backward(cache, sl.d_logits, fwd, bo);
  for (int k = 0; k < 8; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.below(lora[0].a.size()));
    const double na = central(lora[0].a.data()[i], [&] { return s.loss(fwd); });
    EXPECT_LT(rel_err(grads[0].a.data()[i], na), kTol);
    const auto j = static_cast<Eigen::Index>(rng.below(lora[0].b.size()));
    const double nb = central(lora[0].b.data()[j], [&] { return s.loss(fwd); });
    EXPECT_LT(rel_err(grads[0].b.data()[j], nb), kTol);
  }
}

}  // namespace
}  // namespace kebench
