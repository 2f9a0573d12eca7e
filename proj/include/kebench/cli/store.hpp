// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/cli/config.hpp"

namespace kebench {

// <first 16 hex digits of the config hash>-<UTC yyyymmddThhmmss><millis>Z
std::string make_run_id(const std::string& config_hash, std::chrono::system_clock::time_point when);

// Advisory exclusive lock on <dir>/.kebench.lock, released on destruction (or
// by the OS if the process dies). A second holder gets a ValidationError.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

// Files of one run. Every file is written once; rewriting any of them is
// rejected, and records.jsonl only grows.
class RunWriter {
 public:
  RunWriter(std::string run_id, std::filesystem::path dir);

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }

  void write_text(const std::string& name, const std::string& text);
  void write_json(const std::string& name, const nlohmann::json& j);
  void append_record(const nlohmann::json& record);
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

 private:
  std::string run_id_;
  std::filesystem::path dir_;
};

class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // Creates <root>/<run id>/ with config.json. Rejects an existing run id.
  RunWriter create(const RunConfig& config,
                   std::chrono::system_clock::time_point when = std::chrono::system_clock::now());
  bool exists(const std::string& run_id) const;
  std::filesystem::path run_dir(const std::string& run_id) const;
  std::vector<std::string> list() const;
  nlohmann::json read_json(const std::string& run_id, const std::string& name) const;

 private:
  std::filesystem::path root_;
};

}  // namespace kebench
