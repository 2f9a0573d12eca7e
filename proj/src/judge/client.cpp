// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/judge/client.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <regex>
#include <thread>

#include "kebench/common.hpp"
#include "kebench/substrate/hashing.hpp"

namespace kebench {

void JudgeConfig::validate() const {
  if (max_attempts < 1) throw ValidationError("judge max_attempts must be >= 1");
  if (concurrency < 1) throw ValidationError("judge concurrency must be >= 1");
  if (timeout_s <= 0.0) throw ValidationError("judge timeout must be positive");
  if (backoff_base_ms < 0.0) throw ValidationError("judge backoff must be non-negative");
  static const std::regex kEnvName("^[A-Z_][A-Z0-9_]*$");
  if (!credential_env.empty() && !std::regex_match(credential_env, kEnvName)) {
    throw ValidationError(
        "judge credential must reference an environment variable name (e.g. JUDGE_API_KEY), "
        "not a literal value");
  }
}

nlohmann::json JudgeConfig::to_json() const {
  return {{"endpoint", endpoint},       {"model", model},
          {"credential_env", credential_env}, {"max_attempts", max_attempts},
          {"backoff_base_ms", backoff_base_ms}, {"timeout_s", timeout_s},
          {"concurrency", concurrency}, {"temperature", temperature}};
}

JudgeConfig JudgeConfig::from_json(const nlohmann::json& j) {
  JudgeConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model = j.value("model", c.model);
  c.credential_env = j.value("credential_env", c.credential_env);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  c.backoff_base_ms = j.value("backoff_base_ms", c.backoff_base_ms);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.concurrency = j.value("concurrency", c.concurrency);
  c.temperature = j.value("temperature", c.temperature);
  c.validate();
  return c;
}

std::string to_string(TranscriptMode m) {
  switch (m) {
    case TranscriptMode::kLive:
      return "live";
    case TranscriptMode::kRecorded:
      return "recorded";
    case TranscriptMode::kScripted:
      return "scripted";
  }
  return "unknown";
}

void Transcript::append(TranscriptEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::string Transcript::to_jsonl() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::json j{{"mode", to_string(mode_)}, {"prompt_hash", e.prompt_hash},
                     {"prompt", e.prompt},        {"response", e.response},
                     {"error", e.error},          {"attempt", e.attempt}};
    out += j.dump() + "\n";
  }
  return out;
}

void Transcript::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write transcript " + path.string());
  out << to_jsonl();
}

JudgeClient::JudgeClient(JudgeConfig config, std::shared_ptr<JudgeTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), transcript_(transport_->mode()) {
  config_.validate();
}

std::string JudgeClient::complete(const std::string& prompt) {
  if (prompt.empty()) throw ValidationError("judge prompt is empty");
  {
    std::unique_lock lock(slot_mu_);
    slot_cv_.wait(lock, [&] { return in_flight_ < config_.concurrency; });
    ++in_flight_;
  }
  struct Release {
    JudgeClient* c;
    ~Release() {
      {
        std::lock_guard lock(c->slot_mu_);
        --c->in_flight_;
      }
      c->slot_cv_.notify_one();
    }
  } release{this};

  const std::string hash = sha256_hex(prompt);
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    try {
      std::string response = transport_->send(prompt, config_);
      transcript_.append({hash, prompt, response, "", attempt});
      return response;
    } catch (const TransportError& e) {
      last_error = e.what();
      transcript_.append({hash, prompt, "", last_error, attempt});
    }
    if (attempt < config_.max_attempts && transport_->mode() == TranscriptMode::kLive &&
        config_.backoff_base_ms > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          config_.backoff_base_ms * std::pow(2.0, attempt - 1)));
    }
  }
  throw TransportError("judge call failed after " + std::to_string(config_.max_attempts) +
                       " attempts: " + last_error);
}

nlohmann::json JudgeClient::metadata() const {
  return {{"identity", identity()},
          {"mode", to_string(transport_->mode())},
          {"config", config_.to_json()}};
}

}  // namespace kebench
