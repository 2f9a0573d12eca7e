// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kebench/eval/answers.hpp"
#include "kebench/paradigms/qa_item.hpp"
#include "kebench/paradigms/templates.hpp"
#include "kebench/substrate/language_model.hpp"
#include "kebench/substrate/transformer.hpp"

namespace kebench {

enum class InferenceMode { kTwoStep, kOneStep };
std::string to_string(InferenceMode m);
InferenceMode inference_mode_from_string(const std::string& s);

// Multiple-choice prompt pieces recovered from a rendered template.
struct ParsedMcq {
  std::optional<std::string> reference;
  std::string question;
  std::vector<std::string> options;
  bool wants_rationale = false;  // prompt ends with "Rationale:"
};
std::optional<ParsedMcq> parse_mcq_prompt(std::string_view prompt);

// Answers rendered multiple-choice prompts with a small transformer: each
// option is scored by its mean token log-probability after the edit prompt
// for the question (with the reference in front for open-book prompts), so
// edits made through that prompt show up directly in the choice. Two-step
// prompts get a greedy continuation as the rationale. Anything else falls
// through to plain greedy generation.
class OptionLikelihoodModel : public LanguageModel {
 public:
  explicit OptionLikelihoodModel(const TransformerModel& model,
                                 std::string edit_template = "Question: {question}\nAnswer:",
                                 int rationale_tokens = 24);

  std::string identity() const override;
  std::string generate(std::string_view prompt, const GenerationOptions& opts) const override;

  std::vector<double> option_scores(const ParsedMcq& mcq) const;
  // Highest mean log-probability; ties go to the earlier option.
  int choose(const ParsedMcq& mcq) const;

 private:
  std::string context(const ParsedMcq& mcq) const;

  const TransformerModel& model_;
  std::string edit_template_;
  int rationale_tokens_;
};

std::string responder_identity(const std::string& base_identity);

std::map<std::string, std::string> item_prompt_fields(const QAItem& item);

struct InferenceOptions {
  InferenceMode mode = InferenceMode::kTwoStep;
  int max_tokens = 128;
};

// Permutes the item with `seed`, prompts the model greedily and extracts the
// answer. A context overflow is recorded on the prediction, not thrown.
Prediction infer(const LanguageModel& model, const QAItem& item, const std::string& set,
                 std::uint64_t seed, const PromptTemplates& templates,
                 const InferenceOptions& opts = {});

// Open-book (with reference) or closed-book letter answer on the item as
// given, for benchmark construction.
struct McqAnswer {
  std::string raw_output;
  std::optional<char> letter;  // nullopt = unparseable
};
McqAnswer ask_mcq(const LanguageModel& model, const QAItem& item, bool open_book,
                  const PromptTemplates& templates);

}  // namespace kebench
