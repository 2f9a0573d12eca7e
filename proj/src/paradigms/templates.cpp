// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/paradigms/templates.hpp"

#include <fstream>
#include <sstream>

#include "kebench/common.hpp"

namespace kebench {
namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> kDefaults{
      {"edit_prompt", "Question: {question}\nAnswer:"},
      {"mcq_open_book",
       "Use the reference to answer the multiple-choice question.\n"
       "Reference: {reference}\nQuestion: {question}\nOptions:\n{options}\n"
       "Reply with the letter of the correct option.\nFinal answer:"},
      {"mcq_closed_book",
       "Answer the multiple-choice question.\nQuestion: {question}\nOptions:\n{options}\n"
       "Reply with the letter of the correct option.\nFinal answer:"},
      {"infer_two_step",
       "Answer the multiple-choice question. First explain your reasoning step by step, then "
       "finish with a line of the form \"Final answer: <letter>\".\n"
       "Question: {question}\nOptions:\n{options}\nRationale:"},
      {"infer_one_step",
       "Answer the multiple-choice question with the letter of the correct option only, in the "
       "form \"Final answer: <letter>\".\nQuestion: {question}\nOptions:\n{options}\nFinal answer:"},
      {"rationale",
       "You are given a medical multiple-choice question, its correct answer and a reference "
       "passage. Using the reference as context, write a step-by-step rationale explaining why "
       "the answer is correct. Number the steps \"STEP 1:\", \"STEP 2:\" and so on, and end with a "
       "sentence that states the correct answer.\n"
       "Reference: {reference}\nQuestion: {question}\nOptions:\n{options}\n"
       "Correct answer: {answer}\nRationale:"},
      {"rationale_retry",
       "\nThe previous rationale did not state the correct answer. Make sure the rationale "
       "names the correct answer \"{answer}\" explicitly."},
      {"scenario_gen",
       "Medical fact: {reference}\nSource question: {question}\nCorrect answer: {answer}\n"
       "Write one new multiple-choice question that places this fact in a realistic clinical "
       "scenario (a short patient presentation) so that answering it requires the same fact. "
       "Give four options with exactly one correct. Use exactly this format:\n"
       "QUESTION: <question>\nA: <option>\nB: <option>\nC: <option>\nD: <option>\n"
       "ANSWER: <letter>"},
      {"scenario_ret",
       "Medical fact: {reference}\nSource question: {question}\n"
       "Write one new multiple-choice question about common, well-established medical knowledge "
       "in a realistic clinical scenario. It must not depend on the fact above. Give four "
       "options with exactly one correct. Use exactly this format:\n"
       "QUESTION: <question>\nA: <option>\nB: <option>\nC: <option>\nD: <option>\n"
       "ANSWER: <letter>"},
      {"factuality",
       "Judge the factual accuracy of the rationale for the medical question below, using the "
       "reference and the correct answer as ground truth. Give a factual score from 1 (mostly "
       "wrong) to 5 (fully accurate) and say whether the rationale contains hallucinated "
       "content. Reply exactly as: score: <1-5>, hallucination: <yes|no>\n"
       "Question: {question}\nCorrect answer: {answer}\nReference: {reference}\n"
       "Rationale: {rationale}"},
      {"qor",
       "Rate the rationale produced for the medical question below on five dimensions, each an "
       "integer from 0 (absent) to 5 (excellent). Reply with exactly these five lines:\n"
       "factual_accuracy: <0-5>\nlogical_flow: <0-5>\nrelevance: <0-5>\ncompleteness: <0-5>\n"
       "answer_correctness: <0-5>\n"
       "Question: {question}\nOptions:\n{options}\nCorrect answer: {answer}\n"
       "Rationale: {rationale}"},
  };
  return kDefaults;
}

}  // namespace

std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '{') {
      const auto close = text.find('}', i);
      if (close != std::string::npos) {
        const std::string key = text.substr(i + 1, close - i - 1);
        const bool is_name = !key.empty() && key.find_first_not_of(
                                                 "abcdefghijklmnopqrstuvwxyz_") == std::string::npos;
        if (is_name) {
          auto it = values.find(key);
          if (it == values.end()) throw ValidationError("template placeholder {" + key + "} has no value");
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

PromptTemplates::PromptTemplates() : text_(defaults()) {}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("template directory " + dir.string() + " does not exist");
  }
  PromptTemplates t;
  for (const auto& [name, _] : defaults()) {
    const auto file = dir / (name + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && text.back() == '\n') text.pop_back();
    t.text_[name] = text;
  }
  return t;
}

const std::string& PromptTemplates::get(const std::string& name) const {
  auto it = text_.find(name);
  if (it == text_.end()) throw ValidationError("unknown prompt template " + name);
  return it->second;
}

void PromptTemplates::set(const std::string& name, std::string text) { text_[name] = std::move(text); }

std::string PromptTemplates::render(const std::string& name,
                                    const std::map<std::string, std::string>& values) const {
  return render_template(get(name), values);
}

}  // namespace kebench
