// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/eval/answers.hpp"
#include "kebench/judge/client.hpp"
#include "kebench/judge/structured.hpp"
#include "kebench/paradigms/templates.hpp"

namespace kebench {

struct SetCounts {
  int total = 0;
  int correct = 0;
  int unextractable = 0;
  int errors = 0;

  std::optional<double> accuracy() const;
  nlohmann::json to_json() const;
};

SetCounts tally(std::span<const Prediction> predictions);

struct Interpretability {
  std::optional<double> rouge_l, bleu, qor;
  int lexical_scored = 0;
  int qor_requested = 0;
  int qor_scored = 0;  // coverage = scored / requested

  nlohmann::json to_json() const;
};

struct MetricReport {
  SetCounts ori, gen, ret;
  Interpretability interpretability;
  int excluded = 0;  // items without a buildable target

  // Undefined (nullopt) when the set is empty.
  std::optional<double> efficacy() const { return ori.accuracy(); }
  std::optional<double> generalization() const { return gen.accuracy(); }
  std::optional<double> retention() const { return ret.accuracy(); }
  // Mean of the three; undefined unless all three are.
  std::optional<double> avg() const;
  double unextractable_rate() const;

  nlohmann::json to_json() const;
};

// Judge-scored rationale quality. nullopt when the judge fails after its
// retries or the reply never parses; the caller counts coverage.
std::optional<QorScores> score_qor(JudgeClient& judge, const Prediction& prediction,
                                   const QAItem& item, const PromptTemplates& templates);

// Table-1 layout: one row block per method, one column per (model, dataset),
// Eff./Gen./Ret./avg. per cell; values are percentages.
struct TableCell {
  std::optional<double> eff, gen, ret, avg;
};

enum class Mark { kNone, kBest, kSecond };
std::string to_string(Mark m);

struct ResultTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::string> methods;
  std::vector<std::vector<TableCell>> cells;  // [method][column]
  std::string watermark;                      // set when bindings were mixed

  void add(const std::string& method, const std::string& column, const TableCell& cell);

  // Per column over the avg. values at display precision (one decimal):
  // every method at the maximum is best, the largest value strictly below it
  // is second.
  std::vector<std::vector<Mark>> marks() const;

  std::string render_text() const;  // best as **x**, second as __x__
  std::string render_csv() const;
  nlohmann::json to_json() const;
};

TableCell cell_from_report(const MetricReport& r);

// Published table with its printed markers: {"title", "columns", "rows": [{
// "method", "eff", "gen", "ret", "avg", "marks"}]}.
struct AnnotatedTable {
  ResultTable table;
  std::vector<std::vector<Mark>> printed_marks;
};
AnnotatedTable load_annotated_table(const std::filesystem::path& path);

}  // namespace kebench
