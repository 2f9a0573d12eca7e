// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kebench {

struct JudgeConfig {
  std::string endpoint;        // base URL for the live transport
  std::string model;           // remote model name
  std::string credential_env;  // name of the environment variable holding the key
  int max_attempts = 3;
  double backoff_base_ms = 500.0;
  double timeout_s = 60.0;
  int concurrency = 4;
  double temperature = 0.0;

  // Rejects malformed values, including a credential reference that is not an
  // environment-variable name.
  void validate() const;
  // Never contains credential material (only the variable name).
  nlohmann::json to_json() const;
  static JudgeConfig from_json(const nlohmann::json& j);
};

enum class TranscriptMode { kLive, kRecorded, kScripted };
std::string to_string(TranscriptMode m);

// Backend that answers one prompt; throws TransportError on failure.
class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  virtual std::string send(const std::string& prompt, const JudgeConfig& config) = 0;
  virtual TranscriptMode mode() const = 0;
  virtual std::string identity() const = 0;
};

struct TranscriptEntry {
  std::string prompt_hash;
  std::string prompt;
  std::string response;  // empty on failure
  std::string error;     // empty on success
  int attempt = 1;
};

// Append-only, internally synchronized call log.
class Transcript {
 public:
  explicit Transcript(TranscriptMode mode) : mode_(mode) {}
  void append(TranscriptEntry e);
  std::vector<TranscriptEntry> entries() const;
  TranscriptMode mode() const { return mode_; }
  std::string to_jsonl() const;
  void save(const std::filesystem::path& path) const;

 private:
  TranscriptMode mode_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
};

// Retrying, concurrency-capped front end over a transport.
class JudgeClient {
 public:
  JudgeClient(JudgeConfig config, std::shared_ptr<JudgeTransport> transport);

  // Throws ValidationError for an empty prompt and TransportError (carrying the
  // last cause) once attempts are exhausted.
  std::string complete(const std::string& prompt);

  const JudgeConfig& config() const { return config_; }
  std::string identity() const { return transport_->identity(); }
  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }
  // Metadata recorded with results (no credentials).
  nlohmann::json metadata() const;

 private:
  JudgeConfig config_;
  std::shared_ptr<JudgeTransport> transport_;
  Transcript transcript_;
  std::mutex slot_mu_;
  std::condition_variable slot_cv_;
  int in_flight_ = 0;
};

}  // namespace kebench
