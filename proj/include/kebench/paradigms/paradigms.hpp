// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/common.hpp"
#include "kebench/judge/client.hpp"
#include "kebench/judge/structured.hpp"
#include "kebench/paradigms/qa_item.hpp"
#include "kebench/paradigms/templates.hpp"
#include "kebench/substrate/language_model.hpp"
#include "kebench/substrate/tokenizer.hpp"

namespace kebench {

enum class Paradigm { kGta, kRe, kSgr, kEgr };
std::string to_string(Paradigm p);
Paradigm paradigm_from_string(const std::string& s);

struct KnowledgeTarget {
  Paradigm paradigm = Paradigm::kGta;
  std::string text;
  std::string source;     // gold_answer | reference | generated_rationale
  std::string prompt_hash;  // empty for GTA/RE
  std::string generator;  // empty for GTA/RE
  int token_length = 0;
  int attempts = 0;  // generation attempts used (SGR/EGR)

  nlohmann::json to_json() const;
};

struct RationaleRecord {
  std::vector<std::string> steps;
  std::string final_statement;
  std::optional<int> factuality_score;
  std::optional<bool> hallucination;
};

// The item cannot provide a target under a paradigm. `reason` is one of
// re-unavailable, sgr-unbuildable, egr-unbuildable.
class ParadigmUnavailable : public DataError {
 public:
  ParadigmUnavailable(std::string reason, const std::string& what)
      : DataError(what), reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

// Token count under `tok`, or whitespace-separated words without one.
int count_tokens(const Tokenizer* tok, std::string_view text);

// Strips a leading "<capital letter>:" prefix and surrounding whitespace.
std::string strip_option_prefix(std::string_view text);

// Case-folded text with whitespace runs collapsed to one space.
std::string normalize_for_match(std::string_view text);

KnowledgeTarget build_gta(const QAItem& item, const Tokenizer* tok = nullptr);
KnowledgeTarget build_re(const QAItem& item, const Tokenizer* tok = nullptr);

// Splits on lines that begin "STEP <n>:"; text without markers is one step.
RationaleRecord parse_rationale(const std::string& text);

struct RationaleOptions {
  std::vector<double> temperatures{0.0, 0.3, 0.7};
  int max_tokens = 256;
};

// Self-generated rationale from the model that will be edited. Attempts run
// at the listed temperatures until the rationale contains the gold answer.
std::pair<KnowledgeTarget, RationaleRecord> build_sgr(const LanguageModel& model, const QAItem& item,
                                                      const PromptTemplates& templates,
                                                      const Tokenizer* tok = nullptr,
                                                      const RationaleOptions& opts = {});

// Same contract with an external generator; later attempts append the
// rationale_retry note to the prompt.
std::pair<KnowledgeTarget, RationaleRecord> build_egr(JudgeClient& judge, const QAItem& item,
                                                      const PromptTemplates& templates,
                                                      const Tokenizer* tok = nullptr,
                                                      int attempts = 3);

KnowledgeTarget build_target(Paradigm p, const QAItem& item, const LanguageModel* model,
                             JudgeClient* judge, const PromptTemplates& templates,
                             const Tokenizer* tok);

// Scores the rationale and stores the verdict on the record.
FactualityVerdict audit_factuality(JudgeClient& judge, RationaleRecord& record,
                                   const std::string& rationale, const QAItem& item,
                                   const PromptTemplates& templates);

struct HallucinationSummary {
  int audited = 0;
  int flagged = 0;
  double rate = 0.0;        // flagged / audited, in [0, 1]
  double mean_score = 0.0;
  std::string rate_percent() const;  // two decimals, e.g. "3.00%"
};

// Throws UndefinedMetricError when no record has been audited.
HallucinationSummary summarize_audits(const std::vector<RationaleRecord>& records);

enum class LengthBucket { kUnder10, k50To100, k100To150, k150To200, k200To250, kOverflow };
LengthBucket length_bucket(int tokens);
std::string to_string(LengthBucket b);
const std::vector<LengthBucket>& all_length_buckets();

}  // namespace kebench
