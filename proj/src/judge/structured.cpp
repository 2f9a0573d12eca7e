// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/judge/structured.hpp"

#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace kebench {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

int parse_int_field(const std::string& text, const std::string& pattern, const char* name, int lo,
                    int hi) {
  const std::regex re(pattern, std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) throw ParseError(fmt::format("missing field {}", name));
  int v = 0;
  try {
    v = std::stoi(m[1].str());
  } catch (const std::exception&) {
    throw ParseError(fmt::format("field {} is not an integer", name));
  }
  if (v < lo || v > hi) {
    throw ParseError(fmt::format("field {} = {} outside {}..{}", name, v, lo, hi));
  }
  return v;
}

}  // namespace

double QorScores::normalized() const {
  int sum = 0;
  for (int s : scores) sum += s;
  return static_cast<double>(sum) / 25.0;
}

FactualityVerdict parse_factuality(const std::string& response) {
  FactualityVerdict v;
  v.score = parse_int_field(response, R"(score\s*[:=]\s*(-?\d+))", "score", 1, 5);
  static const std::regex kHall(R"(hallucination\s*[:=]\s*(yes|no|true|false))", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(response, m, kHall)) throw ParseError("missing field hallucination");
  const std::string flag = m[1].str();
  v.hallucination = flag[0] == 'y' || flag[0] == 'Y' || flag[0] == 't' || flag[0] == 'T';
  return v;
}

QorScores parse_qor(const std::string& response) {
  QorScores q;
  for (std::size_t i = 0; i < q.kFields.size(); ++i) {
    std::string name = q.kFields[i];
    std::string pat;
    for (char c : name) pat += c == '_' ? std::string("[ _]") : std::string(1, c);
    q.scores[i] = parse_int_field(response, "(?:^|\\n)\\s*" + pat + R"(\s*:\s*(-?\d+))",
                                  q.kFields[i], 0, 5);
  }
  return q;
}

ScenarioDraft parse_scenario(const std::string& response) {
  std::istringstream in(response);
  std::string line;
  ScenarioDraft d;
  std::set<char> seen;
  bool in_question = false, have_answer = false, have_question = false;
  static const std::regex kOption(R"(^\s*([A-Za-z])\s*[:.)]\s*(.*)$)");
  static const std::regex kQuestion(R"(^\s*QUESTION\s*:\s*(.*)$)", std::regex::icase);
  static const std::regex kAnswer(R"(^\s*ANSWER\s*:\s*\(?([A-Za-z])\)?\s*$)", std::regex::icase);
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_match(line, m, kQuestion)) {
      d.question = trim(m[1].str());
      in_question = have_question = true;
    } else if (std::regex_match(line, m, kAnswer)) {
      d.answer = static_cast<char>(std::toupper(m[1].str()[0]));
      have_answer = true;
      in_question = false;
    } else if (std::regex_match(line, m, kOption) && have_question) {
      const char letter = static_cast<char>(std::toupper(m[1].str()[0]));
      if (letter < 'A' || letter > 'D') {
        throw ParseError(fmt::format("unexpected option {}; exactly four options A-D required", letter));
      }
      if (!seen.insert(letter).second) throw ParseError(fmt::format("option {} repeated", letter));
      d.options[letter - 'A'] = trim(m[2].str());
      in_question = false;
    } else if (in_question && !trim(line).empty()) {
      d.question += " " + trim(line);
    }
  }
  if (!have_question || d.question.empty()) throw ParseError("missing QUESTION");
  if (seen.size() != 4) {
    throw ParseError(fmt::format("{} options found; exactly four options A-D required", seen.size()));
  }
  std::set<std::string> texts;
  for (const auto& o : d.options) {
    if (o.empty()) throw ParseError("empty option text");
    if (!texts.insert(o).second) throw ParseError("duplicate option text");
  }
  if (!have_answer) throw ParseError("missing ANSWER");
  if (d.answer < 'A' || d.answer > 'D') throw ParseError("ANSWER must be one of A-D");
  return d;
}

nlohmann::json parse_structured(const std::string& response, SchemaTag tag) {
  switch (tag) {
    case SchemaTag::kFactuality: {
      const auto v = parse_factuality(response);
      return {{"score", v.score}, {"hallucination", v.hallucination}};
    }
    case SchemaTag::kQor: {
      const auto q = parse_qor(response);
      nlohmann::json j;
      for (std::size_t i = 0; i < q.kFields.size(); ++i) j[q.kFields[i]] = q.scores[i];
      return j;
    }
    case SchemaTag::kScenario: {
      const auto d = parse_scenario(response);
      return {{"question", d.question},
              {"options", d.options},
              {"answer_letter", std::string(1, d.answer)}};
    }
  }
  throw ValidationError("unknown schema tag");
}

}  // namespace kebench
