// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/language_model.hpp"

#include <fstream>

#include "kebench/common.hpp"

namespace kebench {

ScriptedModel::ScriptedModel(std::string identity, std::vector<Rule> rules,
                             std::string default_response)
    : identity_(std::move(identity)),
      rules_(std::move(rules)),
      default_response_(std::move(default_response)) {}

ScriptedModel::ScriptedModel(
    std::string identity,
    std::function<std::string(std::string_view, const GenerationOptions&)> fn)
    : identity_(std::move(identity)), fn_(std::move(fn)) {}

ScriptedModel ScriptedModel::from_json(const nlohmann::json& j) {
  std::vector<Rule> rules;
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    Rule rule;
    if (r.contains("all_of")) {
      rule.all_of = r.at("all_of").get<std::vector<std::string>>();
    } else {
      rule.all_of = {r.at("contains").get<std::string>()};
    }
    rule.response = r.at("response").get<std::string>();
    rules.push_back(std::move(rule));
  }
  return ScriptedModel(j.at("identity").get<std::string>(), std::move(rules),
                       j.value("default", std::string()));
}

ScriptedModel ScriptedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scripted model file " + path);
  nlohmann::json j;
  try {
    in >> j;
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed scripted model file " + path + ": " + e.what());
  }
}

std::string ScriptedModel::generate(std::string_view prompt, const GenerationOptions& opts) const {
  if (fn_) return fn_(prompt, opts);
  for (const auto& rule : rules_) {
    bool match = true;
    for (const auto& frag : rule.all_of) {
      if (prompt.find(frag) == std::string_view::npos) {
        match = false;
        break;
      }
    }
    if (match) return rule.response;
  }
  return default_response_;
}

}  // namespace kebench
