// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/eval/answers.hpp"

#include <cctype>

#include "kebench/common.hpp"
#include "kebench/paradigms/paradigms.hpp"
#include "kebench/substrate/random.hpp"

namespace kebench {
namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// First single-character uppercase token naming an option. A letter followed
// by a lowercase word ("A patient ...") reads as prose, not as a choice.
std::optional<char> first_standalone_letter(std::string_view text, int n_options) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < 'A' || c >= 'A' + n_options) continue;
    if (i > 0 && is_alnum(text[i - 1])) continue;
    if (i + 1 < text.size() && is_alnum(text[i + 1])) continue;
    if (i + 2 < text.size() && text[i + 1] == ' ' &&
        std::islower(static_cast<unsigned char>(text[i + 2]))) {
      continue;
    }
    return c;
  }
  return std::nullopt;
}

}  // namespace

LetterMap LetterMap::identity(int n) {
  LetterMap m;
  for (int i = 0; i < n; ++i) m.order.push_back(i);
  return m;
}

char LetterMap::to_permuted(char original) const {
  const int o = original - 'A';
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == o) return static_cast<char>('A' + i);
  }
  throw ValidationError(std::string("letter ") + original + " is outside the option range");
}

char LetterMap::to_original(char permuted) const {
  const int p = permuted - 'A';
  if (p < 0 || p >= static_cast<int>(order.size())) {
    throw ValidationError(std::string("letter ") + permuted + " is outside the option range");
  }
  return static_cast<char>('A' + order[p]);
}

LetterMap LetterMap::inverse() const {
  LetterMap inv;
  inv.order.assign(order.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) inv.order[order[i]] = static_cast<int>(i);
  return inv;
}

bool LetterMap::is_identity() const {
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] != static_cast<int>(i)) return false;
  }
  return true;
}

PermutedItem permute_options(const QAItem& item, std::uint64_t seed) {
  const int n = static_cast<int>(item.options.size());
  if (n < 2) throw ValidationError("item " + item.id + " needs at least two options to permute");
  PermutedItem out;
  out.seed = seed;
  out.map = LetterMap::identity(n);
  if (seed != 0) {
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(out.map.order[i], out.map.order[j]);
    }
  }
  out.item = item;
  for (int i = 0; i < n; ++i) out.item.options[i] = item.options[out.map.order[i]];
  out.item.answer_letter = out.map.to_permuted(item.answer_letter);
  return out;
}

std::optional<char> extract_answer(const std::string& raw,
                                   const std::vector<std::string>& options) {
  const int n = static_cast<int>(options.size());
  std::string lower;
  for (char c : raw) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  const auto marker = lower.rfind("final answer");
  if (marker != std::string::npos) {
    auto end = raw.find('\n', marker);
    if (end == std::string::npos) end = raw.size();
    const std::string_view tail(raw.data() + marker + 12, end - marker - 12);
    if (auto c = first_standalone_letter(tail, n)) return c;
  }
  if (auto c = first_standalone_letter(raw, n)) return c;

  const std::string hay = normalize_for_match(raw);
  std::optional<char> found;
  for (int i = 0; i < n; ++i) {
    const std::string needle = normalize_for_match(strip_option_prefix(options[i]));
    if (needle.empty() || hay.find(needle) == std::string::npos) continue;
    if (found) return std::nullopt;  // ambiguous
    found = static_cast<char>('A' + i);
  }
  return found;
}

nlohmann::json Prediction::to_json() const {
  nlohmann::json j{{"item_id", item_id},
                   {"set", set},
                   {"raw_output", raw_output},
                   {"gold_letter", std::string(1, gold_letter)},
                   {"permutation_seed", permutation_seed},
                   {"correct", correct()}};
  j["rationale"] = rationale ? nlohmann::json(*rationale) : nlohmann::json(nullptr);
  j["letter"] = letter ? nlohmann::json(std::string(1, *letter)) : nlohmann::json("unextractable");
  if (!error.empty()) j["error"] = error;
  return j;
}

double score_accuracy(std::span<const Prediction> predictions, const std::string& set) {
  if (predictions.empty()) throw UndefinedMetricError("accuracy over an empty " + set + " set");
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    if (p.set != set) {
      throw ValidationError("prediction for " + p.item_id + " belongs to set " + p.set +
                            ", not " + set);
    }
    correct += p.correct() ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace kebench
