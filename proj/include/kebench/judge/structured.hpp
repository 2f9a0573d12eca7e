// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "kebench/common.hpp"
#include "kebench/judge/client.hpp"

namespace kebench {

class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& what) : DataError(what) {}
};

struct FactualityVerdict {
  int score = 0;  // 1..5
  bool hallucination = false;
};

// Five rationale-quality dimensions, each an integer 0..5.
struct QorScores {
  static constexpr std::array<const char*, 5> kFields{
      "factual_accuracy", "logical_flow", "relevance", "completeness", "answer_correctness"};
  std::array<int, 5> scores{};

  // Sum over the maximum attainable 25.
  double normalized() const;
};

struct ScenarioDraft {
  std::string question;
  std::array<std::string, 4> options;  // A..D
  char answer = 'A';
};

enum class SchemaTag { kScenario, kQor, kFactuality };

// "score: 5, hallucination: no" (any order, case-insensitive).
FactualityVerdict parse_factuality(const std::string& response);
// One "name: n" pair per dimension; names may use spaces or underscores.
QorScores parse_qor(const std::string& response);
// QUESTION: ... / A: ... / B: ... / C: ... / D: ... / ANSWER: <letter>
ScenarioDraft parse_scenario(const std::string& response);

nlohmann::json parse_structured(const std::string& response, SchemaTag tag);

inline constexpr const char* kReformatNote =
    "\n\nYour previous reply did not follow the required format. Respond in the exact "
    "format requested, with no other text.";

// complete + parse; one reprompt with kReformatNote on ParseError, then the
// ParseError propagates.
template <typename T>
T complete_structured(JudgeClient& judge, const std::string& prompt,
                      const std::function<T(const std::string&)>& parse) {
  try {
    return parse(judge.complete(prompt));
  } catch (const ParseError&) {
    return parse(judge.complete(prompt + kReformatNote));
  }
}

}  // namespace kebench
