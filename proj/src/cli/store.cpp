// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/cli/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>

#include <fmt/format.h>

#include "kebench/common.hpp"

namespace kebench {

namespace fs = std::filesystem;

std::string make_run_id(const std::string& config_hash, std::chrono::system_clock::time_point when) {
  if (config_hash.size() < 16) throw ValidationError("config hash too short for a run id");
  const auto secs = std::chrono::system_clock::to_time_t(when);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(when.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
  return fmt::format("{}-{}{:03d}Z", config_hash.substr(0, 16), buf, static_cast<int>(millis));
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / ".kebench.lock";
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw ValidationError(fmt::format("cannot open lock {}: {}", path.string(), std::strerror(errno)));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ValidationError("another run holds the lock on " + dir.string());
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

RunWriter::RunWriter(std::string run_id, fs::path dir) : run_id_(std::move(run_id)), dir_(std::move(dir)) {}

void RunWriter::write_text(const std::string& name, const std::string& text) {
  const auto p = dir_ / name;
  if (fs::exists(p)) throw ValidationError(fmt::format("run {} already has {}; records are immutable", run_id_, name));
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw DataError("failed writing " + p.string());
}

void RunWriter::write_json(const std::string& name, const nlohmann::json& j) {
  write_text(name, j.dump(2) + "\n");
}

void RunWriter::append_record(const nlohmann::json& record) {
  std::ofstream out(dir_ / "records.jsonl", std::ios::binary | std::ios::app);
  out << record.dump() << "\n";
  if (!out) throw DataError("failed appending to records.jsonl of run " + run_id_);
}

ResultStore::ResultStore(fs::path root) : root_(std::move(root)) {}

RunWriter ResultStore::create(const RunConfig& config, std::chrono::system_clock::time_point when) {
  const std::string id = make_run_id(config.hash(), when);
  fs::create_directories(root_);
  const auto dir = root_ / id;
  // create_directory reports false when the directory already existed.
  if (!fs::create_directory(dir)) throw ValidationError("run id " + id + " already exists; records are immutable");
  RunWriter w(id, dir);
  nlohmann::json cfg = config.to_json();
  cfg["config_hash"] = config.hash();
  cfg["run_id"] = id;
  w.write_json("config.json", cfg);
  return w;
}

bool ResultStore::exists(const std::string& run_id) const {
  return !run_id.empty() && fs::exists(root_ / run_id / "config.json");
}

fs::path ResultStore::run_dir(const std::string& run_id) const {
  if (!exists(run_id)) throw ValidationError("unknown run id '" + run_id + "' under " + root_.string());
  return root_ / run_id;
}

std::vector<std::string> ResultStore::list() const {
  std::vector<std::string> out;
  if (!fs::exists(root_)) return out;
  for (const auto& e : fs::directory_iterator(root_)) {
    if (e.is_directory() && fs::exists(e.path() / "config.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json ResultStore::read_json(const std::string& run_id, const std::string& name) const {
  const auto p = run_dir(run_id) / name;
  std::ifstream in(p);
  if (!in) throw DataError("run " + run_id + " has no " + name);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("run " + run_id + ": " + name + " is not valid JSON");
  return j;
}

}  // namespace kebench
