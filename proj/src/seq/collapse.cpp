// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/seq/collapse.hpp"

#include <cctype>
#include <map>
#include <sstream>

#include "kebench/common.hpp"

namespace kebench {

nlohmann::json CollapseReport::to_json() const {
  nlohmann::json j{{"collapsed", collapsed},
                   {"alnum_ratio", alnum_ratio},
                   {"top_token_share", top_token_share},
                   {"top_token", top_token},
                   {"triggers", triggers},
                   {"samples", samples}};
  j["exact_match"] = exact_match ? nlohmann::json(*exact_match) : nlohmann::json(nullptr);
  j["exact_match_baseline"] =
      exact_match_baseline ? nlohmann::json(*exact_match_baseline) : nlohmann::json(nullptr);
  return j;
}

double alnum_ratio(const std::string& text) {
  int alnum = 0, visible = 0;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) continue;
    ++visible;
    alnum += std::isalnum(u) ? 1 : 0;
  }
  return visible == 0 ? 0.0 : static_cast<double>(alnum) / visible;
}

CollapseReport detect_collapse_outputs(const std::vector<std::string>& outputs,
                                       std::optional<double> exact_match,
                                       std::optional<double> exact_match_baseline,
                                       const CollapseThresholds& t) {
  CollapseReport r;
  r.exact_match = exact_match;
  r.exact_match_baseline = exact_match_baseline;
  std::map<std::string, int> counts;
  int words = 0;
  double ratio_sum = 0.0;
  for (const auto& out : outputs) {
    ratio_sum += alnum_ratio(out);
    std::istringstream in(out);
    std::string w;
    while (in >> w) {
      ++counts[w];
      ++words;
    }
  }
  r.alnum_ratio = outputs.empty() ? 0.0 : ratio_sum / outputs.size();
  for (const auto& [w, n] : counts) {
    const double share = static_cast<double>(n) / words;
    if (share > r.top_token_share) {
      r.top_token_share = share;
      r.top_token = w;
    }
  }
  if (r.alnum_ratio < t.min_alnum_ratio) r.triggers.push_back("alnum-ratio");
  if (r.top_token_share > t.max_top_token_share) r.triggers.push_back("token-repetition");
  if (exact_match && exact_match_baseline && *exact_match == 0.0 &&
      *exact_match_baseline > t.exact_match_baseline) {
    r.triggers.push_back("exact-match-zero");
  }
  r.collapsed = !r.triggers.empty();
  for (std::size_t i = 0; i < outputs.size() && i < 3; ++i) r.samples.push_back(outputs[i]);
  return r;
}

CollapseReport detect_collapse(const LanguageModel& model, const std::vector<std::string>& probes,
                               std::optional<double> exact_match,
                               std::optional<double> exact_match_baseline, int max_tokens,
                               const CollapseThresholds& t) {
  if (probes.size() < 10) {
    throw ValidationError("collapse detection needs at least 10 probe prompts, got " +
                          std::to_string(probes.size()));
  }
  GenerationOptions g;
  g.max_tokens = max_tokens;
  std::vector<std::string> outputs;
  for (const auto& p : probes) outputs.push_back(model.generate(p, g));
  return detect_collapse_outputs(outputs, exact_match, exact_match_baseline, t);
}

std::vector<std::string> default_probe_prompts() {
  return {"The doctor walked to",      "A nurse drove to",
          "The patient with fever was given", "Doctors treat cough with",
          "The farmer visited",        "My mother said that",
          "Asthma often affects the",  "The teacher painted",
          "A student found",           "Question: What treats gout?\nAnswer:",
          "The old man left",          "Her brother watched"};
}

}  // namespace kebench
