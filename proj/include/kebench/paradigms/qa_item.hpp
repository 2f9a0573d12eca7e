// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kebench {

// A multiple-choice question. Options are lettered A, B, C... in order.
struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> options;
  char answer_letter = 'A';
  std::string answer_text;
  std::optional<std::string> reference;
  std::string subject;
  std::string set;        // source | ori | gen | ret
  std::string source_id;  // provenance for generated items

  // Gold letter in range, options non-empty and distinct.
  void validate() const;
  int answer_index() const { return answer_letter - 'A'; }
  bool operator==(const QAItem&) const = default;
};

// JSON Lines schema: {id, question, options: {"A": text, ...}, answer_letter,
// answer_text, reference (string or null), subject, set, source_id}.
nlohmann::json item_to_json(const QAItem& item);
QAItem item_from_json(const nlohmann::json& j);

struct ItemLoadResult {
  std::vector<QAItem> items;
  std::vector<std::pair<int, std::string>> errors;  // (1-based line, reason)
};

// Malformed lines are reported and skipped. Throws ValidationError when the
// file cannot be opened.
ItemLoadResult load_items(const std::filesystem::path& path);
std::string items_to_jsonl(const std::vector<QAItem>& items);
void save_items(const std::filesystem::path& path, const std::vector<QAItem>& items);

// "A: text\nB: text..." as shown to models.
std::string format_options(const std::vector<std::string>& options);

}  // namespace kebench
