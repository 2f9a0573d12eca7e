// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace kebench {

struct GenerationOptions {
  int max_tokens = 64;
  // 0 means greedy. Positive values sample with a seeded generator; only
  // rationale regeneration uses this.
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

// Text-in/text-out surface shared by the editable transformer, scripted rigs
// and the option-likelihood responder.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string identity() const = 0;
  virtual std::string generate(std::string_view prompt, const GenerationOptions& opts) const = 0;
};

// Rule-driven stand-in: the first rule whose fragments all occur in the prompt
// answers; otherwise the default response. Optional per-temperature responses
// let tests script regeneration behaviour.
class ScriptedModel : public LanguageModel {
 public:
  struct Rule {
    std::vector<std::string> all_of;
    std::string response;
  };

  ScriptedModel(std::string identity, std::vector<Rule> rules, std::string default_response);
  // Arbitrary function form for tests.
  ScriptedModel(std::string identity,
                std::function<std::string(std::string_view, const GenerationOptions&)> fn);

  static ScriptedModel from_json(const nlohmann::json& j);
  static ScriptedModel load(const std::string& path);

  std::string identity() const override { return identity_; }
  std::string generate(std::string_view prompt, const GenerationOptions& opts) const override;

 private:
  std::string identity_;
  std::vector<Rule> rules_;
  std::string default_response_;
  std::function<std::string(std::string_view, const GenerationOptions&)> fn_;
};

}  // namespace kebench
