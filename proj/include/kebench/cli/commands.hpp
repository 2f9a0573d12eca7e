// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/cli/config.hpp"
#include "kebench/cli/store.hpp"
#include "kebench/common.hpp"
#include "kebench/eval/report.hpp"

namespace kebench {

// Process exit codes: 0 success, 2 validation, 3 transport, 4 editor,
// 5 data, 6 undefined metric, 1 anything else.
int exit_code(ErrorCategory category);
int exit_code_for(const std::exception& e);

struct CommandResult {
  std::string run_id;
  std::filesystem::path run_dir;
  nlohmann::json summary;
};

// Each run command validates the config before loading anything, takes the
// output directory lock and writes one immutable run directory.
CommandResult cmd_bench_build(const RunConfig& config);
CommandResult cmd_edit_eval(const RunConfig& config);
CommandResult cmd_seq_run(const RunConfig& config);
CommandResult cmd_layer_sweep(const RunConfig& config);
CommandResult run_command(const RunConfig& config);

struct ReportOptions {
  std::string title = "Single editing results";
  // Allows runs whose benchmarks have different bindings in one column; the
  // output then carries a watermark.
  bool allow_mixed_bindings = false;
  std::filesystem::path out_dir;  // table.csv / table.txt / table.json when set
};

// Merges the rows of the given runs (edit-eval) into one table.
ResultTable cmd_report(const ResultStore& store, const std::vector<std::string>& run_ids,
                       const ReportOptions& opts);

// Recomputes the markers of a published table and lists every cell where
// they differ from the printed ones.
struct AnnotationCheck {
  ResultTable table;
  std::vector<std::string> mismatches;
  bool matches() const { return mismatches.empty(); }
};
AnnotationCheck check_annotation(const std::filesystem::path& path);

// Trains the fixture model and writes <out>/model.kefx.
nlohmann::json cmd_make_fixture(const std::filesystem::path& out_dir, int steps = 0);

// Renders a stored CSV ("line": series,x,y; "heat": sweep grid) to SVG.
void cmd_plot(const std::string& kind, const std::filesystem::path& csv, const std::filesystem::path& svg,
              const std::string& title);

}  // namespace kebench
