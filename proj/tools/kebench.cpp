// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

// kebench: build edit benchmarks, run single and sequential editing
// evaluations, sweep layers and render tables/plots.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kebench/cli/commands.hpp"

namespace {

using namespace kebench;

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
};

void add_run_command(CLI::App& app, const std::string& name, const std::string& help, RunArgs& args) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("-c,--config", args.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("-s,--set", args.sets, "override a config key, e.g. --set method=rome --set layers=[1,2]");
}

int run(const std::string& name, const RunArgs& args) {
  std::vector<std::string> sets = args.sets;
  // The subcommand supplies the command when the file leaves it out.
  std::ifstream in(args.config);
  const auto raw = nlohmann::json::parse(in, nullptr, false);
  if (raw.is_object() && !raw.contains("command")) sets.insert(sets.begin(), "command=" + name);
  RunConfig config = load_run_config(args.config, sets);
  if (config.command != name) {
    throw ValidationError(fmt::format("config is for '{}', not '{}'", config.command, name));
  }
  CommandResult r = run_command(config);
  std::cout << fmt::format("run {} -> {}\n", r.run_id, r.run_dir.string());
  std::cout << r.summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-editing benchmark construction and evaluation"};
  app.require_subcommand(1);

  RunArgs bench_args, eval_args, seq_args, sweep_args;
  add_run_command(app, "bench-build", "build a benchmark from a source corpus", bench_args);
  add_run_command(app, "edit-eval", "single-edit evaluation over a benchmark", eval_args);
  add_run_command(app, "seq-run", "sequential editing with checkpoint evaluation", seq_args);
  add_run_command(app, "layer-sweep", "edit-layer sweep by target length", sweep_args);

  auto* report = app.add_subcommand("report", "merge edit-eval runs into a table, or check an annotation file");
  std::string store_dir = "runs", out_dir, title = "Single editing results", annotation;
  std::vector<std::string> run_ids;
  bool allow_mixed = false;
  report->add_option("--store", store_dir, "run store directory");
  report->add_option("runs", run_ids, "run ids");
  report->add_option("--out", out_dir, "write table.csv/table.txt/table.json here");
  report->add_option("--title", title, "table title");
  report->add_flag("--allow-mixed-bindings", allow_mixed, "accept runs on different benchmarks (watermarked)");
  report->add_option("--annotation", annotation, "published table to re-mark")->check(CLI::ExistingFile);

  auto* fixture = app.add_subcommand("make-fixture", "train the fixture model");
  std::string fixture_out;
  int steps = 0;
  fixture->add_option("-o,--out", fixture_out, "output directory")->required();
  fixture->add_option("--steps", steps, "pretraining steps (default from the fixture options)");

  auto* plot = app.add_subcommand("plot", "render a stored CSV as SVG");
  std::string kind = "line", csv, svg, plot_title;
  plot->add_option("--kind", kind, "line | heat")->check(CLI::IsMember({"line", "heat"}));
  plot->add_option("--csv", csv, "input CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--out", svg, "output SVG")->required();
  plot->add_option("--title", plot_title, "chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("bench-build")) return run("bench-build", bench_args);
    if (app.got_subcommand("edit-eval")) return run("edit-eval", eval_args);
    if (app.got_subcommand("seq-run")) return run("seq-run", seq_args);
    if (app.got_subcommand("layer-sweep")) return run("layer-sweep", sweep_args);
    if (app.got_subcommand("report")) {
      if (!annotation.empty()) {
        AnnotationCheck check = check_annotation(annotation);
        std::cout << check.table.render_text();
        for (const auto& m : check.mismatches) std::cout << "mismatch: " << m << "\n";
        std::cout << (check.matches() ? "markers match the printed table\n" : "markers differ\n");
        return check.matches() ? 0 : 5;
      }
      ReportOptions opts;
      opts.title = title;
      opts.allow_mixed_bindings = allow_mixed;
      opts.out_dir = out_dir;
      std::cout << cmd_report(ResultStore(store_dir), run_ids, opts).render_text();
      return 0;
    }
    if (app.got_subcommand("make-fixture")) {
      std::cout << cmd_make_fixture(fixture_out, steps).dump(2) << "\n";
      return 0;
    }
    if (app.got_subcommand("plot")) {
      cmd_plot(kind, csv, svg, plot_title);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 1;
}
