// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace kebench {

// Named prompt templates with {placeholder} fields. Built-in defaults can be
// overridden from a directory of <name>.txt files.
//
// Names: edit_prompt, mcq_open_book, mcq_closed_book, infer_two_step,
// infer_one_step, rationale, rationale_retry, scenario_gen, scenario_ret,
// factuality, qor.
class PromptTemplates {
 public:
  PromptTemplates();
  static PromptTemplates load(const std::filesystem::path& dir);

  const std::string& get(const std::string& name) const;
  void set(const std::string& name, std::string text);

  // Substitutes every {key}; a placeholder without a value is an error.
  std::string render(const std::string& name, const std::map<std::string, std::string>& values) const;

 private:
  std::map<std::string, std::string> text_;
};

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values);

}  // namespace kebench
