// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "kebench/judge/transports.hpp"

#include <cstdlib>
#include <fstream>

// Eigen must precede httplib: <resolv.h> defines a _res macro that clashes
// with Eigen parameter names.
#include "kebench/common.hpp"
#include "kebench/substrate/hashing.hpp"

#include <httplib.h>

namespace kebench {

ScriptedTransport::ScriptedTransport(std::string identity, std::vector<Rule> rules,
                                     std::string default_response)
    : identity_(std::move(identity)), rules_(std::move(rules)), default_(std::move(default_response)) {}

ScriptedTransport::ScriptedTransport(std::string identity, Fn fn)
    : identity_(std::move(identity)), fn_(std::move(fn)) {}

std::shared_ptr<ScriptedTransport> ScriptedTransport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open judge script " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    std::vector<Rule> rules;
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      Rule rule;
      rule.all_of = r.contains("all_of") ? r.at("all_of").get<std::vector<std::string>>()
                                         : std::vector<std::string>{r.at("contains").get<std::string>()};
      rule.response = r.at("response").get<std::string>();
      rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedTransport>(j.at("identity").get<std::string>(), std::move(rules),
                                               j.value("default", std::string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed judge script " + path.string() + ": " + e.what());
  }
}

std::string ScriptedTransport::send(const std::string& prompt, const JudgeConfig&) {
  if (fn_) {
    int attempt;
    {
      std::lock_guard lock(mu_);
      attempt = ++attempts_[prompt];
    }
    return fn_(prompt, attempt);
  }
  for (const auto& r : rules_) {
    bool ok = true;
    for (const auto& f : r.all_of) ok = ok && prompt.find(f) != std::string::npos;
    if (ok) return r.response;
  }
  return default_;
}

ReplayTransport::ReplayTransport(std::map<std::string, std::string> by_hash, std::string identity)
    : by_hash_(std::move(by_hash)), identity_(std::move(identity)) {}

std::shared_ptr<ReplayTransport> ReplayTransport::load(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw ValidationError("cannot open transcript " + jsonl.string());
  std::map<std::string, std::string> by_hash;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.value("error", std::string()).empty()) continue;
      by_hash[j.at("prompt_hash").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed transcript line " + std::to_string(n) + ": " + e.what());
    }
  }
  return std::make_shared<ReplayTransport>(std::move(by_hash), "replay:" + jsonl.filename().string());
}

std::string ReplayTransport::send(const std::string& prompt, const JudgeConfig&) {
  auto it = by_hash_.find(sha256_hex(prompt));
  if (it == by_hash_.end()) {
    throw TransportError("prompt " + sha256_hex(prompt).substr(0, 12) + " is not in the transcript");
  }
  return it->second;
}

HttpTransport::HttpTransport(const JudgeConfig& config) {
  config.validate();
  if (config.endpoint.empty()) throw ValidationError("live judge needs an endpoint");
  if (config.credential_env.empty()) throw ValidationError("live judge needs credential_env");
  const char* token = std::getenv(config.credential_env.c_str());
  if (!token || !*token) {
    throw ValidationError("environment variable " + config.credential_env + " is not set");
  }
  token_ = token;
  identity_ = config.model + "@" + config.endpoint;
}

std::string HttpTransport::send(const std::string& prompt, const JudgeConfig& config) {
  httplib::Client cli(config.endpoint);
  const auto secs = static_cast<time_t>(config.timeout_s);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_bearer_token_auth(token_);
  const nlohmann::json body{{"model", config.model},
                            {"temperature", config.temperature},
                            {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  auto res = cli.Post("/v1/chat/completions", body.dump(), "application/json");
  if (!res) throw TransportError("judge request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("judge returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("judge reply is not a chat completion: ") + e.what());
  }
}

}  // namespace kebench
