// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/seq/external.hpp"

#include <algorithm>
#include <fstream>

#include "kebench/common.hpp"
#include "kebench/eval/lexical_metrics.hpp"

namespace kebench {

std::size_t ExternalBenchmark::size() const {
  return rule == ScoringRule::kChoice ? choice_items.size() : exact_items.size();
}

std::vector<std::string> ExternalBenchmark::split_names() const {
  std::vector<std::string> names(split.begin(), split.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

void ExternalBenchmark::validate() const {
  if (split.size() != size()) {
    throw ValidationError(name + ": " + std::to_string(split.size()) + " split labels for " +
                          std::to_string(size()) + " items");
  }
  for (const auto& s : split) {
    if (s.empty()) throw ValidationError(name + ": empty split label");
  }
}

std::set<std::string> load_subject_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open subject list " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.insert(line);
  }
  return out;
}

ExternalBenchmark load_split_mcq(const std::filesystem::path& path,
                                 const std::set<std::string>& medical_subjects, std::string name) {
  auto r = load_items(path);
  if (!r.errors.empty()) {
    throw DataError(path.string() + " line " + std::to_string(r.errors.front().first) + ": " +
                    r.errors.front().second);
  }
  ExternalBenchmark b;
  b.name = std::move(name);
  b.rule = ScoringRule::kChoice;
  b.choice_items = std::move(r.items);
  for (const auto& item : b.choice_items) {
    b.split.push_back(medical_subjects.count(item.subject) ? "medical" : "non-medical");
  }
  b.validate();
  return b;
}

ExternalBenchmark load_exact_match(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  ExternalBenchmark b;
  b.name = name;
  b.rule = ScoringRule::kExactMatch;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      b.exact_items.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                               j.at("answer").get<std::string>()});
      b.split.push_back(name);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  b.validate();
  return b;
}

nlohmann::json ExternalScores::to_json() const {
  nlohmann::json j{{"name", name},
                   {"split_accuracy", split_accuracy},
                   {"split_size", split_size},
                   {"overall", overall}};
  if (overall_delta) {
    j["split_delta"] = split_delta;
    j["overall_delta"] = *overall_delta;
  }
  return j;
}

bool exact_match(const std::string& output, const std::string& answer) {
  const auto out = word_tokens(output);
  const auto want = word_tokens(answer);
  if (out.empty() || want.empty()) return false;
  return out.size() >= want.size() && std::equal(want.begin(), want.end(), out.begin());
}

double weighted_overall(const std::map<std::string, double>& acc,
                        const std::map<std::string, int>& sizes) {
  double num = 0.0;
  int den = 0;
  for (const auto& [split, a] : acc) {
    const int n = sizes.at(split);
    num += a * n;
    den += n;
  }
  if (den == 0) throw UndefinedMetricError("overall accuracy over no items");
  return num / den;
}

ExternalScores eval_external(const LanguageModel& responder, const LanguageModel& generator,
                             const ExternalBenchmark& bench, const PromptTemplates& templates,
                             const ExternalScores* baseline) {
  bench.validate();
  ExternalScores s;
  s.name = bench.name;
  std::map<std::string, int> correct;
  for (const auto& name : bench.split_names()) {
    correct[name] = 0;
    s.split_size[name] = 0;
  }
  InferenceOptions one_step{InferenceMode::kOneStep, 16};
  for (std::size_t i = 0; i < bench.size(); ++i) {
    bool ok;
    if (bench.rule == ScoringRule::kChoice) {
      ok = infer(responder, bench.choice_items[i], bench.name, 0, templates, one_step).correct();
    } else {
      const auto& item = bench.exact_items[i];
      GenerationOptions g;
      g.max_tokens = 8;
      const std::string prompt = templates.render("edit_prompt", {{"question", item.question},
                                                                  {"options", ""},
                                                                  {"answer", ""},
                                                                  {"reference", ""}});
      ok = exact_match(generator.generate(prompt, g), item.answer);
    }
    ++s.split_size[bench.split[i]];
    correct[bench.split[i]] += ok ? 1 : 0;
  }
  for (const auto& [name, n] : s.split_size) {
    if (n == 0) throw UndefinedMetricError("split " + name + " of " + bench.name + " is empty");
    s.split_accuracy[name] = static_cast<double>(correct[name]) / n;
  }
  s.overall = weighted_overall(s.split_accuracy, s.split_size);
  if (baseline) {
    for (const auto& [name, a] : s.split_accuracy) s.split_delta[name] = a - baseline->split_accuracy.at(name);
    s.overall_delta = s.overall - baseline->overall;
  }
  return s;
}

}  // namespace kebench
