// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/eval/inference.hpp"

#include <cmath>
#include <regex>
#include <sstream>

#include "kebench/common.hpp"
#include "kebench/paradigms/paradigms.hpp"

namespace kebench {

std::string to_string(InferenceMode m) {
  return m == InferenceMode::kTwoStep ? "two-step" : "one-step";
}

InferenceMode inference_mode_from_string(const std::string& s) {
  if (s == "two-step") return InferenceMode::kTwoStep;
  if (s == "one-step") return InferenceMode::kOneStep;
  throw ValidationError("unknown inference mode " + s + " (expected two-step or one-step)");
}

std::optional<ParsedMcq> parse_mcq_prompt(std::string_view prompt) {
  const std::string text(prompt);
  const auto q = text.find("Question: ");
  const auto opts = text.find("\nOptions:\n", q == std::string::npos ? 0 : q);
  if (q == std::string::npos || opts == std::string::npos) return std::nullopt;
  ParsedMcq out;
  out.question = text.substr(q + 10, opts - q - 10);
  const auto r = text.find("Reference: ");
  if (r != std::string::npos && r < q) {
    auto end = text.rfind("\nQuestion: ", q);
    if (end == std::string::npos || end < r) end = q;
    out.reference = text.substr(r + 11, end - r - 11);
  }
  static const std::regex kOption(R"(^([A-Z]): (.*)$)");
  std::istringstream in(text.substr(opts + 10));
  std::string line;
  std::smatch m;
  while (std::getline(in, line) && std::regex_match(line, m, kOption)) {
    if (m[1].str()[0] != static_cast<char>('A' + out.options.size())) break;
    out.options.push_back(m[2].str());
  }
  if (out.options.size() < 2) return std::nullopt;
  std::string tail = text;
  while (!tail.empty() && std::isspace(static_cast<unsigned char>(tail.back()))) tail.pop_back();
  out.wants_rationale = tail.ends_with("Rationale:");
  return out;
}

OptionLikelihoodModel::OptionLikelihoodModel(const TransformerModel& model,
                                             std::string edit_template, int rationale_tokens)
    : model_(model), edit_template_(std::move(edit_template)), rationale_tokens_(rationale_tokens) {}

std::string responder_identity(const std::string& base_identity) {
  return "likelihood-answerer(" + base_identity + ")";
}

std::string OptionLikelihoodModel::identity() const { return responder_identity(model_.identity()); }

std::string OptionLikelihoodModel::context(const ParsedMcq& mcq) const {
  std::string ctx = render_template(edit_template_, {{"question", mcq.question}});
  if (mcq.reference) ctx = "Reference: " + *mcq.reference + "\n" + ctx;
  return ctx;
}

std::vector<double> OptionLikelihoodModel::option_scores(const ParsedMcq& mcq) const {
  const auto ctx = model_.prompt_tokens(context(mcq));
  const auto& tok = model_.tokenizer();
  std::vector<double> scores;
  for (const auto& option : mcq.options) {
    std::vector<int> seq = ctx;
    std::vector<int> target;
    if (!Tokenizer::normalize(option).empty()) target = tok.encode(option, true);
    if (target.empty()) {
      scores.push_back(-INFINITY);
      continue;
    }
    seq.insert(seq.end(), target.begin(), target.end());
    model_.check_window(seq.size());
    ForwardCache cache = model_.forward(seq);
    double total = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const int pos = static_cast<int>(ctx.size() + i) - 1;
      const auto col = cache.logits.col(pos);
      const double mx = col.maxCoeff();
      const double lse = mx + std::log((col.array() - mx).exp().sum());
      total += col(target[i]) - lse;
    }
    scores.push_back(total / static_cast<double>(target.size()));
  }
  return scores;
}

int OptionLikelihoodModel::choose(const ParsedMcq& mcq) const {
  const auto scores = option_scores(mcq);
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::string OptionLikelihoodModel::generate(std::string_view prompt,
                                            const GenerationOptions& opts) const {
  const auto mcq = parse_mcq_prompt(prompt);
  if (!mcq) return model_.generate(prompt, opts);
  const char letter = static_cast<char>('A' + choose(*mcq));
  if (!mcq->wants_rationale) return std::string(1, letter);
  GenerationOptions g = opts;
  g.max_tokens = std::min(opts.max_tokens, rationale_tokens_);
  std::string rationale = model_.generate(context(*mcq), g);
  const auto nl = rationale.find('\n');
  if (nl != std::string::npos) rationale.resize(nl);
  while (!rationale.empty() && rationale.front() == ' ') rationale.erase(rationale.begin());
  return rationale + "\nFinal answer: " + letter;
}

std::map<std::string, std::string> item_prompt_fields(const QAItem& item) {
  return {{"question", item.question},
          {"options", format_options(item.options)},
          {"answer", strip_option_prefix(item.answer_text)},
          {"reference", item.reference.value_or("")}};
}

Prediction infer(const LanguageModel& model, const QAItem& item, const std::string& set,
                 std::uint64_t seed, const PromptTemplates& templates,
                 const InferenceOptions& opts) {
  const PermutedItem p = permute_options(item, seed);
  Prediction pred;
  pred.item_id = item.id;
  pred.set = set;
  pred.gold_letter = p.item.answer_letter;
  pred.permutation_seed = seed;
  const bool two_step = opts.mode == InferenceMode::kTwoStep;
  const std::string prompt =
      templates.render(two_step ? "infer_two_step" : "infer_one_step", item_prompt_fields(p.item));
  GenerationOptions g;
  g.max_tokens = opts.max_tokens;
  try {
    pred.raw_output = model.generate(prompt, g);
  } catch (const ContextOverflowError& e) {
    pred.error = e.what();
    return pred;
  }
  pred.letter = extract_answer(pred.raw_output, p.item.options);
  if (two_step) {
    std::string lower;
    for (char c : pred.raw_output) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto marker = lower.rfind("final answer");
    std::string r = pred.raw_output.substr(0, marker == std::string::npos ? pred.raw_output.size() : marker);
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.pop_back();
    if (!r.empty()) pred.rationale = r;
  }
  return pred;
}

McqAnswer ask_mcq(const LanguageModel& model, const QAItem& item, bool open_book,
                  const PromptTemplates& templates) {
  if (open_book && (!item.reference || item.reference->empty())) {
    throw ValidationError("item " + item.id + " has no reference for an open-book prompt");
  }
  const std::string prompt =
      templates.render(open_book ? "mcq_open_book" : "mcq_closed_book", item_prompt_fields(item));
  GenerationOptions g;
  g.max_tokens = 16;
  McqAnswer a;
  a.raw_output = model.generate(prompt, g);
  a.letter = extract_answer(a.raw_output, item.options);
  return a;
}

}  // namespace kebench
