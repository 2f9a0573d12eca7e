// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kebench/paradigms/qa_item.hpp"

namespace kebench {

// Q_ori / Q_gen / Q_ret built against one model. Generated items point at
// their source through QAItem::source_id, which must name a Q_ori item.
struct EditBenchmark {
  std::string model_identity;
  std::vector<QAItem> ori, gen, ret;

  // Throws DataError on a dangling or missing provenance link.
  void check_provenance() const;
  std::vector<const QAItem*> linked(const std::vector<QAItem>& set, const std::string& source) const;

  // ori.jsonl, gen.jsonl, ret.jsonl and benchmark.json (binding + counts).
  void save(const std::filesystem::path& dir) const;
  static EditBenchmark load(const std::filesystem::path& dir);
};

// Rejects a benchmark built for a different model, citing both identities.
void check_binding(const EditBenchmark& bench, const std::string& model_identity);

}  // namespace kebench
