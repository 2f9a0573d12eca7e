// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/eval/lexical_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace kebench {

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<int> prev(ref.size() + 1, 0), row(ref.size() + 1, 0);
  for (const auto& c : cand) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      row[j] = c == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], row[j - 1]);
    }
    std::swap(prev, row);
  }
  const double lcs = prev[ref.size()];
  if (lcs == 0) return 0.0;
  const double p = lcs / cand.size();
  const double r = lcs / ref.size();
  return 2 * p * r / (p + r);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l(word_tokens(candidate), word_tokens(reference));
}

double bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, int> ref_counts, cand_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i) {
      ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
    }
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
      ++cand_counts[{cand.begin() + i, cand.begin() + i + n}];
    }
    double matched = 0, total = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = matched / total;
    } else {
      p = (matched + 1) / (total + 1);
    }
    log_sum += std::log(p);
  }
  const double c = cand.size(), r = ref.size();
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4.0);
}

double bleu(std::string_view candidate, std::string_view reference) {
  return bleu(word_tokens(candidate), word_tokens(reference));
}

}  // namespace kebench
