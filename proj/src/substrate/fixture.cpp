// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/fixture.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

#include "kebench/substrate/random.hpp"

namespace kebench {
namespace {

struct Condition {
  const char* name;
  const char* drug;
  const char* organ;
};

// Each condition has one learned treatment and one affected organ.
constexpr std::array<Condition, 12> kConditions{{
    {"fever", "aspirin", "blood"},
    {"cough", "honey", "lung"},
    {"anemia", "iron", "blood"},
    {"asthma", "albuterol", "lung"},
    {"diabetes", "insulin", "pancreas"},
    {"migraine", "rest", "brain"},
    {"ulcer", "omeprazole", "stomach"},
    {"rash", "cream", "skin"},
    {"infection", "penicillin", "blood"},
    {"arthritis", "ibuprofen", "bone"},
    {"insomnia", "melatonin", "brain"},
    {"gout", "allopurinol", "kidney"},
}};

constexpr std::array<const char*, 10> kPeople{
    "The doctor", "A nurse", "The patient", "My mother", "The old man",
    "A young girl", "The teacher", "Her brother", "The farmer", "A student"};
constexpr std::array<const char*, 8> kPlaces{
    "the clinic", "the hospital", "the school", "the market",
    "the farm", "the city", "the village", "the park"};
constexpr std::array<const char*, 8> kActions{
    "walked to", "drove to", "visited", "cleaned", "left", "painted", "found", "watched"};
constexpr std::array<const char*, 6> kTimes{
    "in the morning", "after lunch", "at night", "on Monday", "every day", "last week"};

template <typename A>
const auto& pick(Rng& rng, const A& a) {
  return a[rng.below(a.size())];
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

std::vector<std::string> fixture_corpus_lines(std::uint64_t seed, int n_lines) {
  Rng rng(seed);
  std::vector<std::string> lines;
  lines.reserve(n_lines);
  for (int i = 0; i < n_lines; ++i) {
    const auto& c = pick(rng, kConditions);
    switch (rng.below(12)) {
      case 0:
        lines.push_back(fmt::format("Doctors treat {} with {}.", c.name, c.drug));
        break;
      case 1:
        lines.push_back(fmt::format("The patient with {} was given {}.", c.name, c.drug));
        break;
      case 2:
        lines.push_back(fmt::format("{} often affects the {}.", capitalized(c.name), c.organ));
        break;
      case 3:
        lines.push_back(fmt::format("Question: What treats {}?\nAnswer: {}.", c.name, c.drug));
        break;
      case 4:
        lines.push_back(
            fmt::format("Question: Which organ does {} affect?\nAnswer: {}.", c.name, c.organ));
        break;
      case 5:
        lines.push_back(fmt::format("{} {} {} {}.", pick(rng, kPeople), pick(rng, kActions),
                                    pick(rng, kPlaces), pick(rng, kTimes)));
        break;
      case 6:
        lines.push_back(fmt::format("{} said that {} helps with {}.", pick(rng, kPeople), c.drug,
                                    c.name));
        break;
      case 7:
      case 10:
      case 11: {
        // Reference-conditioned QA: half the references name another drug, so
        // the answer has to be read from the context.
        const char* drug = rng.below(2) == 0 ? c.drug : pick(rng, kConditions).drug;
        lines.push_back(fmt::format(
            "Reference: Doctors treat {} with {}.\nQuestion: What treats {}?\nAnswer: {}.", c.name,
            drug, c.name, drug));
        break;
      }
      case 8:
        lines.push_back(fmt::format(
            "Question: A patient with {} came to {}. What treats {}?\nAnswer: {}.", c.name,
            pick(rng, kPlaces), c.name, c.drug));
        break;
      default:
        lines.push_back(fmt::format("{} {} {} and then {} {}.", pick(rng, kPeople),
                                    pick(rng, kActions), pick(rng, kPlaces), pick(rng, kActions),
                                    pick(rng, kPlaces)));
        break;
    }
  }
  return lines;
}

std::vector<FixtureFact> fixture_facts(int n) {
  std::vector<FixtureFact> facts;
  const int k = static_cast<int>(kConditions.size());
  for (int i = 0; i < n; ++i) {
    const auto& c = kConditions[i % k];
    // Shift the treatment to a different condition's drug.
    const char* other = kConditions[(i + 5) % k].drug;
    if (i < k) {
      facts.push_back({fmt::format("Doctors treat {} with", c.name), other});
    } else {
      facts.push_back({fmt::format("The patient with {} was given", c.name), other});
    }
  }
  return facts;
}

PretrainReport pretrain(TransformerModel& model, const std::vector<std::string>& lines,
                        const PretrainOptions& opts) {
  if (lines.empty()) throw ValidationError("pretraining corpus is empty");
  const auto& tok = model.tokenizer();
  std::vector<std::vector<int>> encoded;
  encoded.reserve(lines.size());
  for (const auto& l : lines) encoded.push_back(tok.encode(l));
  const int nl_id = Tokenizer::kByteBase + '\n';

  Rng rng(opts.seed);
  const Architecture& arch = model.architecture();
  Parameters m1 = Parameters::zeros(arch), m2 = Parameters::zeros(arch);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  PretrainReport report;
  report.steps = opts.steps;

  for (int step = 0; step < opts.steps; ++step) {
    Parameters grad = Parameters::zeros(arch);
    double loss = 0.0;
    for (int b = 0; b < opts.batch; ++b) {
      std::vector<int> seq{Tokenizer::kBos};
      std::size_t line = rng.below(encoded.size());
      while (static_cast<int>(seq.size()) < opts.seq_len + 1) {
        const auto& e = encoded[line];
        seq.insert(seq.end(), e.begin(), e.end());
        seq.push_back(nl_id);
        line = (line + 1) % encoded.size();
      }
      seq.resize(opts.seq_len + 1);
      std::vector<int> positions(opts.seq_len);
      for (int i = 0; i < opts.seq_len; ++i) positions[i] = i;
      const ForwardCache cache = model.forward(seq);
      SequenceLoss sl = sequence_nll(cache.logits, seq, positions);
      loss += sl.loss / opts.batch;
      sl.d_logits /= opts.batch;
      BackwardOptions bo;
      bo.param_grads = &grad;
      model.backward(cache, sl.d_logits, {}, bo);
    }
    if (step == 0) report.initial_loss = loss;
    report.final_loss = loss;

    const double norm = std::sqrt(grad.squared_norm());
    const double clip = norm > opts.clip ? opts.clip / norm : 1.0;
    const double rate = opts.rate * 0.5 * (1.0 + std::cos(M_PI * step / opts.steps));
    const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
    auto p = model.mutable_parameters().buffers();
    auto g = grad.buffers();
    auto s1 = m1.buffers();
    auto s2 = m2.buffers();
    for (std::size_t t = 0; t < p.size(); ++t) {
      for (std::size_t i = 0; i < p[t].size(); ++i) {
        const double gi = g[t][i] * clip;
        s1[t][i] = b1 * s1[t][i] + (1 - b1) * gi;
        s2[t][i] = b2 * s2[t][i] + (1 - b2) * gi * gi;
        p[t][i] -= rate * (s1[t][i] / c1) / (std::sqrt(s2[t][i] / c2) + eps);
      }
    }
  }
  return report;
}

FixtureBuild make_fixture_model(const FixtureOptions& opts) {
  const auto lines = fixture_corpus_lines();
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  Tokenizer tok = Tokenizer::train(joined, opts.architecture.vocab_size);
  auto model = TransformerModel::random(opts.architecture, std::move(tok), opts.seed,
                                        fmt::format("fixture-L{}-d{}-s{}", opts.architecture.n_layers,
                                                    opts.architecture.d_model, opts.seed));
  const auto report = pretrain(model, lines, opts.pretrain);
  return {std::move(model), report};
}

}  // namespace kebench
