// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written independently of src/eval, plus shared
// hand-built fixtures. Used by eval_test and the acceptance binary.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kebench/eval/answers.hpp"
#include "kebench/substrate/random.hpp"

namespace kebench::oracle {

// LCS length by top-down recursion with a memo table.
inline int lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int v = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    memo[key] = v;
    return v;
  };
  return go(0, 0);
}

inline double rouge_l(const std::vector<std::string>& c, const std::vector<std::string>& r) {
  if (c.empty() || r.empty()) return 0.0;
  const int l = lcs(c, r);
  if (l == 0) return 0.0;
  const double p = static_cast<double>(l) / c.size(), rec = static_cast<double>(l) / r.size();
  return 2 * p * rec / (p + rec);
}

inline bool same_gram(const std::vector<std::string>& x, std::size_t i, const std::vector<std::string>& y,
                      std::size_t j, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    if (x[i + k] != y[j + k]) return false;
  }
  return true;
}

// Clipped n-gram counts by brute-force scanning: for each candidate position,
// count how often its gram occurred before (in the candidate) and in the
// reference; the position matches while its occurrence index stays below the
// reference count.
inline double bleu(const std::vector<std::string>& c, const std::vector<std::string>& r) {
  if (c.empty() || r.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    double matched = 0, total = 0;
    for (std::size_t i = 0; i + n <= c.size(); ++i) {
      ++total;
      int earlier = 0;
      for (std::size_t k = 0; k < i; ++k) earlier += same_gram(c, k, c, i, n) ? 1 : 0;
      int in_ref = 0;
      for (std::size_t k = 0; k + n <= r.size(); ++k) in_ref += same_gram(r, k, c, i, n) ? 1 : 0;
      if (earlier < in_ref) ++matched;
    }
    const double p = n == 1 ? (total == 0 ? 0.0 : matched / total) : (matched + 1) / (total + 1);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  const double bp = c.size() > r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / c.size());
  return bp * std::exp(log_sum / 4.0);
}

// Deterministic sentence pairs over a small vocabulary so overlaps are common.
inline std::vector<std::pair<std::string, std::string>> text_pairs(int n, std::uint64_t seed) {
  static const std::vector<std::string> kWords{"the", "patient", "has", "low", "vitamin", "c",
                                               "levels", "and", "needs", "therapy", "iron", "b12",
                                               "dose", "is", "high"};
  Rng rng(seed);
  auto sentence = [&] {
    const int len = 1 + static_cast<int>(rng.below(18));
    std::string s;
    for (int i = 0; i < len; ++i) s += (i ? " " : "") + kWords[rng.below(kWords.size())];
    return s;
  };
  std::vector<std::pair<std::string, std::string>> out;
  for (int i = 0; i < n; ++i) out.emplace_back(sentence(), sentence());
  return out;
}

// 30 hand-written predictions: items 1-19 correct, 20-27 wrong letter,
// 28-30 unextractable. Hand tally: 19 / 30.
inline std::vector<Prediction> thirty_item_set() {
  const std::string gold = "ABCDABCDABCDABCDABCDABCDABCDAB";
  const std::string pred = "ABCDABCDABCDABCDABCABCDABCD???";
  std::vector<Prediction> out;
  for (int i = 0; i < 30; ++i) {
    Prediction p;
    p.item_id = "h" + std::to_string(i + 1);
    p.set = "ori";
    p.gold_letter = gold[i];
    if (i < static_cast<int>(pred.size()) && pred[i] != '?') p.letter = pred[i];
    out.push_back(p);
  }
  return out;
}

}  // namespace kebench::oracle
