// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kebench/judge/client.hpp"

namespace kebench {

// Responses chosen by prompt content: the first rule whose fragments all occur
// in the prompt wins, else the default. A function form covers failure
// injection in tests (attempt counts are per prompt).
class ScriptedTransport : public JudgeTransport {
 public:
  struct Rule {
    std::vector<std::string> all_of;
    std::string response;
  };
  using Fn = std::function<std::string(const std::string& prompt, int attempt)>;

  ScriptedTransport(std::string identity, std::vector<Rule> rules, std::string default_response);
  ScriptedTransport(std::string identity, Fn fn);

  static std::shared_ptr<ScriptedTransport> load(const std::filesystem::path& path);

  std::string send(const std::string& prompt, const JudgeConfig& config) override;
  TranscriptMode mode() const override { return TranscriptMode::kScripted; }
  std::string identity() const override { return identity_; }

 private:
  std::string identity_;
  std::vector<Rule> rules_;
  std::string default_;
  Fn fn_;
  std::mutex mu_;
  std::map<std::string, int> attempts_;
};

// Replays the successful entries of a saved transcript keyed by prompt hash.
class ReplayTransport : public JudgeTransport {
 public:
  static std::shared_ptr<ReplayTransport> load(const std::filesystem::path& jsonl);
  explicit ReplayTransport(std::map<std::string, std::string> by_hash, std::string identity);

  std::string send(const std::string& prompt, const JudgeConfig& config) override;
  TranscriptMode mode() const override { return TranscriptMode::kRecorded; }
  std::string identity() const override { return identity_; }

 private:
  std::map<std::string, std::string> by_hash_;
  std::string identity_;
};

// Chat-completions style HTTP(S) endpoint. The bearer token is read from the
// configured environment variable at construction.
class HttpTransport : public JudgeTransport {
 public:
  explicit HttpTransport(const JudgeConfig& config);

  std::string send(const std::string& prompt, const JudgeConfig& config) override;
  TranscriptMode mode() const override { return TranscriptMode::kLive; }
  std::string identity() const override { return identity_; }

 private:
  std::string identity_;
  std::string token_;
};

}  // namespace kebench
