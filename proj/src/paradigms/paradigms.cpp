// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/paradigms/paradigms.hpp"

#include <cctype>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "kebench/substrate/hashing.hpp"

namespace kebench {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::map<std::string, std::string> item_fields(const QAItem& item) {
  return {{"question", item.question},
          {"options", format_options(item.options)},
          {"answer", strip_option_prefix(item.answer_text)},
          {"reference", item.reference.value_or("")}};
}

bool contains_answer(const std::string& rationale, const QAItem& item) {
  const std::string needle = normalize_for_match(strip_option_prefix(item.answer_text));
  return !needle.empty() && normalize_for_match(rationale).find(needle) != std::string::npos;
}

}  // namespace

std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::kGta:
      return "gta";
    case Paradigm::kRe:
      return "re";
    case Paradigm::kSgr:
      return "sgr";
    case Paradigm::kEgr:
      return "egr";
  }
  return "unknown";
}

Paradigm paradigm_from_string(const std::string& s) {
  std::string l;
  for (char c : s) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "gta") return Paradigm::kGta;
  if (l == "re") return Paradigm::kRe;
  if (l == "sgr") return Paradigm::kSgr;
  if (l == "egr") return Paradigm::kEgr;
  throw ValidationError("unknown paradigm " + s + " (expected gta, re, sgr or egr)");
}

nlohmann::json KnowledgeTarget::to_json() const {
  return {{"paradigm", to_string(paradigm)}, {"text", text},
          {"source", source},                {"prompt_hash", prompt_hash},
          {"generator", generator},          {"token_length", token_length},
          {"attempts", attempts}};
}

int count_tokens(const Tokenizer* tok, std::string_view text) {
  if (tok) {
    if (Tokenizer::normalize(text).empty()) return 0;
    return static_cast<int>(tok->encode(text).size());
  }
  std::istringstream in{std::string(text)};
  int n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

std::string strip_option_prefix(std::string_view text) {
  static const std::regex kPrefix(R"(^\s*[A-Z]\s*:\s*)");
  const std::string s(text);
  return trim(std::regex_replace(s, kPrefix, "", std::regex_constants::format_first_only));
}

std::string normalize_for_match(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

KnowledgeTarget build_gta(const QAItem& item, const Tokenizer* tok) {
  KnowledgeTarget t;
  t.paradigm = Paradigm::kGta;
  t.text = strip_option_prefix(item.answer_text);
  t.source = "gold_answer";
  t.token_length = count_tokens(tok, t.text);
  return t;
}

KnowledgeTarget build_re(const QAItem& item, const Tokenizer* tok) {
  if (!item.reference || trim(*item.reference).empty()) {
    throw ParadigmUnavailable("re-unavailable", "item " + item.id + " has no reference text");
  }
  KnowledgeTarget t;
  t.paradigm = Paradigm::kRe;
  t.text = *item.reference;
  t.source = "reference";
  t.token_length = count_tokens(tok, t.text);
  return t;
}

RationaleRecord parse_rationale(const std::string& text) {
  static const std::regex kStep(R"(^\s*STEP\s*\d+\s*[:.]\s*(.*)$)", std::regex::icase);
  RationaleRecord r;
  std::istringstream in(text);
  std::string line;
  std::string last;
  bool any_marker = false;
  std::smatch m;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) last = trim(line);
    if (std::regex_match(line, m, kStep)) {
      r.steps.push_back(trim(m[1].str()));
      any_marker = true;
    } else if (any_marker && !trim(line).empty()) {
      r.steps.back() += " " + trim(line);
    }
  }
  if (!any_marker) r.steps = {trim(text)};
  r.final_statement = last;
  return r;
}

std::pair<KnowledgeTarget, RationaleRecord> build_sgr(const LanguageModel& model, const QAItem& item,
                                                      const PromptTemplates& templates,
                                                      const Tokenizer* tok,
                                                      const RationaleOptions& opts) {
  if (!item.reference || trim(*item.reference).empty()) {
    throw ParadigmUnavailable("sgr-unbuildable", "item " + item.id + " has no reference text");
  }
  const std::string prompt = templates.render("rationale", item_fields(item));
  int attempt = 0;
  for (double temp : opts.temperatures) {
    ++attempt;
    GenerationOptions g;
    g.max_tokens = opts.max_tokens;
    g.temperature = temp;
    g.seed = static_cast<std::uint64_t>(attempt);
    const std::string text = trim(model.generate(prompt, g));
    if (!text.empty() && contains_answer(text, item)) {
      KnowledgeTarget t;
      t.paradigm = Paradigm::kSgr;
      t.text = text;
      t.source = "generated_rationale";
      t.prompt_hash = sha256_hex(prompt);
      t.generator = "model:" + model.identity();
      t.token_length = count_tokens(tok, text);
      t.attempts = attempt;
      return {t, parse_rationale(text)};
    }
  }
  throw ParadigmUnavailable("sgr-unbuildable",
                            fmt::format("item {}: no self-generated rationale contained the answer "
                                        "after {} attempts",
                                        item.id, attempt));
}

std::pair<KnowledgeTarget, RationaleRecord> build_egr(JudgeClient& judge, const QAItem& item,
                                                      const PromptTemplates& templates,
                                                      const Tokenizer* tok, int attempts) {
  if (!item.reference || trim(*item.reference).empty()) {
    throw ParadigmUnavailable("egr-unbuildable", "item " + item.id + " has no reference text");
  }
  const auto fields = item_fields(item);
  const std::string base = templates.render("rationale", fields);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const std::string prompt =
        attempt == 1 ? base : base + templates.render("rationale_retry", fields);
    const std::string text = trim(judge.complete(prompt));
    if (!text.empty() && contains_answer(text, item)) {
      KnowledgeTarget t;
      t.paradigm = Paradigm::kEgr;
      t.text = text;
      t.source = "generated_rationale";
      t.prompt_hash = sha256_hex(prompt);
      t.generator = "judge:" + judge.identity();
      t.token_length = count_tokens(tok, text);
      t.attempts = attempt;
      return {t, parse_rationale(text)};
    }
  }
  throw ParadigmUnavailable("egr-unbuildable",
                            fmt::format("item {}: external rationale never contained the answer "
                                        "after {} attempts",
                                        item.id, attempts));
}

KnowledgeTarget build_target(Paradigm p, const QAItem& item, const LanguageModel* model,
                             JudgeClient* judge, const PromptTemplates& templates,
                             const Tokenizer* tok) {
  switch (p) {
    case Paradigm::kGta:
      return build_gta(item, tok);
    case Paradigm::kRe:
      return build_re(item, tok);
    case Paradigm::kSgr:
      if (!model) throw ValidationError("self-generated rationales need a model");
      return build_sgr(*model, item, templates, tok).first;
    case Paradigm::kEgr:
      if (!judge) throw ValidationError("external rationales need a judge");
      return build_egr(*judge, item, templates, tok).first;
  }
  throw ValidationError("unknown paradigm");
}

FactualityVerdict audit_factuality(JudgeClient& judge, RationaleRecord& record,
                                   const std::string& rationale, const QAItem& item,
                                   const PromptTemplates& templates) {
  if (trim(rationale).empty()) throw ValidationError("cannot audit an empty rationale");
  auto fields = item_fields(item);
  fields["rationale"] = rationale;
  const auto verdict = complete_structured<FactualityVerdict>(
      judge, templates.render("factuality", fields), parse_factuality);
  record.factuality_score = verdict.score;
  record.hallucination = verdict.hallucination;
  return verdict;
}

std::string HallucinationSummary::rate_percent() const { return fmt::format("{:.2f}%", rate * 100.0); }

HallucinationSummary summarize_audits(const std::vector<RationaleRecord>& records) {
  HallucinationSummary s;
  double total = 0.0;
  for (const auto& r : records) {
    if (!r.factuality_score || !r.hallucination) continue;
    ++s.audited;
    s.flagged += *r.hallucination ? 1 : 0;
    total += *r.factuality_score;
  }
  if (s.audited == 0) throw UndefinedMetricError("no audited rationales to summarize");
  s.rate = static_cast<double>(s.flagged) / s.audited;
  s.mean_score = total / s.audited;
  return s;
}

LengthBucket length_bucket(int tokens) {
  if (tokens < 10) return LengthBucket::kUnder10;
  if (tokens >= 50 && tokens < 100) return LengthBucket::k50To100;
  if (tokens >= 100 && tokens < 150) return LengthBucket::k100To150;
  if (tokens >= 150 && tokens < 200) return LengthBucket::k150To200;
  if (tokens >= 200 && tokens <= 250) return LengthBucket::k200To250;
  return LengthBucket::kOverflow;
}

std::string to_string(LengthBucket b) {
  switch (b) {
    case LengthBucket::kUnder10:
      return "<10";
    case LengthBucket::k50To100:
      return "50-100";
    case LengthBucket::k100To150:
      return "100-150";
    case LengthBucket::k150To200:
      return "150-200";
    case LengthBucket::k200To250:
      return "200-250";
    case LengthBucket::kOverflow:
      return "overflow";
  }
  return "overflow";
}

const std::vector<LengthBucket>& all_length_buckets() {
  static const std::vector<LengthBucket> kAll{LengthBucket::kUnder10,  LengthBucket::k50To100,
                                              LengthBucket::k100To150, LengthBucket::k150To200,
                                              LengthBucket::k200To250, LengthBucket::kOverflow};
  return kAll;
}

}  // namespace kebench
