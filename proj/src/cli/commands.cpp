// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "kebench/bench/pipeline.hpp"
#include "kebench/cli/plots.hpp"
#include "kebench/edit/editor.hpp"
#include "kebench/eval/single_edit.hpp"
#include "kebench/judge/transports.hpp"
#include "kebench/seq/harness.hpp"
#include "kebench/substrate/fixture.hpp"
#include "kebench/substrate/hashing.hpp"
#include "kebench/substrate/model_io.hpp"

namespace kebench {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

PromptTemplates load_templates(const RunConfig& c) {
  return c.templates.empty() ? PromptTemplates() : PromptTemplates::load(c.templates);
}

std::unique_ptr<JudgeClient> make_judge(const RunConfig& c) {
  if (!c.judge) return nullptr;
  std::shared_ptr<JudgeTransport> transport;
  if (c.judge->mode == "scripted") {
    transport = ScriptedTransport::load(c.judge->path);
  } else if (c.judge->mode == "replay") {
    transport = ReplayTransport::load(c.judge->path);
  } else {
    transport = std::make_shared<HttpTransport>(c.judge->config);
  }
  return std::make_unique<JudgeClient>(c.judge->config, std::move(transport));
}

EditContext make_context(const RunConfig& c) {
  std::vector<std::string> sample =
      c.covariance_sample.empty() ? fixture_corpus_lines(99, 400) : read_lines(c.covariance_sample);
  std::vector<std::string> preserved;
  if (!c.preserved_prompts.empty()) {
    preserved = read_lines(c.preserved_prompts);
  } else {
    preserved.assign(sample.begin(), sample.begin() + std::min<std::size_t>(8, sample.size()));
  }
  EditContext ctx;
  ctx.covariance = std::make_shared<CovarianceProvider>(std::move(sample));
  ctx.preserved = std::make_shared<PreservedKeyProvider>(std::move(preserved));
  return ctx;
}

// Model identity plus a digest of the item files: two runs share a binding
// only when they evaluated the same benchmark for the same model.
nlohmann::json binding_of(const EditBenchmark& bench) {
  Sha256 h;
  for (const auto* set : {&bench.ori, &bench.gen, &bench.ret}) h.update(items_to_jsonl(*set));
  return {{"model_identity", bench.model_identity}, {"benchmark_hash", h.hex_digest()}};
}

std::string column_label(const RunConfig& c) {
  if (!c.label.empty()) return c.label;
  return fs::path(c.benchmark).lexically_normal().filename().string();
}

std::string row_label(const std::string& method, Paradigm p) {
  return p == Paradigm::kGta ? method : fmt::format("{} ({})", method, to_string(p));
}

// Validates, locks the output directory and creates the run. A failing body
// leaves error.json next to config.json so the record says what happened.
template <typename Body>
CommandResult with_run(const RunConfig& config, Body body) {
  config.validate();
  DirectoryLock lock(config.output_dir);
  ResultStore store(config.output_dir);
  RunWriter w = store.create(config);
  try {
    CommandResult r = body(w);
    w.write_json("status.json", {{"status", "complete"}});
    return r;
  } catch (const std::exception& e) {
    w.write_json("status.json", {{"status", "failed"}, {"exit_code", exit_code_for(e)}, {"error", e.what()}});
    throw;
  }
}

void save_transcript(RunWriter& w, const JudgeClient* judge) {
  if (!judge) return;
  w.write_text("transcript.jsonl", judge->transcript().to_jsonl());
  w.write_json("judge.json", judge->metadata());
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::vector<Series> trajectory_series(const Trajectory& t) {
  std::map<std::string, Series> by_name;
  std::vector<std::string> order;
  auto add = [&](const std::string& name, double x, const std::optional<double>& y) {
    if (!y) return;
    if (!by_name.count(name)) {
      by_name[name] = Series{name, {}, {}};
      order.push_back(name);
    }
    by_name[name].x.push_back(x);
    by_name[name].y.push_back(*y);
  };
  for (const auto& r : t.records) {
    const double x = r.index;
    add("efficacy", x, r.internal.efficacy());
    add("generalization", x, r.internal.generalization());
    add("retention", x, r.internal.retention());
    add("avg", x, r.internal.avg());
    for (const auto& e : r.externals) {
      add(e.name + ":overall", x, e.overall);
      if (e.split_accuracy.size() > 1) {
        for (const auto& [split, acc] : e.split_accuracy) add(e.name + ":" + split, x, acc);
      }
    }
  }
  std::vector<Series> out;
  for (const auto& n : order) out.push_back(by_name[n]);
  return out;
}

}  // namespace

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kValidation: return 2;
    case ErrorCategory::kTransport: return 3;
    case ErrorCategory::kEditor: return 4;
    case ErrorCategory::kData: return 5;
    case ErrorCategory::kMetric: return 6;
    case ErrorCategory::kInternal: return 1;
  }
  return 1;
}

int exit_code_for(const std::exception& e) {
  if (const auto* k = dynamic_cast<const Error*>(&e)) return exit_code(k->category());
  return 1;
}

CommandResult cmd_bench_build(const RunConfig& config) {
  return with_run(config, [&](RunWriter& w) -> CommandResult {
    const PromptTemplates templates = load_templates(config);
    ItemLoadResult corpus = load_items(config.corpus);
    for (const auto& [line, reason] : corpus.errors) {
      w.append_record({{"kind", "load-error"}, {"line", line}, {"reason", reason}});
    }
    auto judge = make_judge(config);

    std::unique_ptr<LanguageModel> scripted;
    std::unique_ptr<TransformerModel> transformer;
    std::unique_ptr<LanguageModel> responder;
    const Tokenizer* tok = nullptr;
    if (config.model.kind == "scripted") {
      scripted = std::make_unique<ScriptedModel>(ScriptedModel::load(config.model.path));
    } else {
      transformer = std::make_unique<TransformerModel>(load_model(config.model.path));
      responder = std::make_unique<OptionLikelihoodModel>(*transformer, templates.get("edit_prompt"));
      tok = &transformer->tokenizer();
    }
    const LanguageModel& model = scripted ? *scripted : *responder;

    BuildOptions opts;
    opts.source_name = config.source_name;
    opts.per_subject_cap = config.per_subject_cap;
    BuildResult result = build_benchmark(model, *judge, corpus.items, templates, opts, tok);
    result.report.load_errors = static_cast<int>(corpus.errors.size());
    if (!result.report.funnel_monotone()) throw DataError("build funnel is not monotone:\n" + result.report.summary());

    result.benchmark.save(w.path("benchmark"));
    export_review(w.path("review.jsonl"), result.benchmark);
    for (const auto& d : result.decisions) {
      w.append_record({{"kind", "decision"}, {"item_id", d.item_id}, {"keep", d.keep}, {"reason", d.reason},
                       {"raw_output", d.raw_output}});
    }
    const BuildAudit audit = audit_benchmark(model, result.benchmark, templates);
    nlohmann::json report = result.report.to_json();
    report["audit"] = {{"ori", opt_json(audit.ori)}, {"gen", opt_json(audit.gen)}, {"ret", opt_json(audit.ret)},
                       {"holds", audit.holds()}};
    w.write_json("build_report.json", report);
    w.write_text("build_report.txt", result.report.summary());
    save_transcript(w, judge.get());
    return {w.run_id(), w.dir(), report};
  });
}

CommandResult cmd_edit_eval(const RunConfig& config) {
  return with_run(config, [&](RunWriter& w) -> CommandResult {
    const PromptTemplates templates = load_templates(config);
    const EditBenchmark bench = EditBenchmark::load(config.benchmark);
    auto judge = make_judge(config);
    TransformerModel model = load_model(config.model.path);
    check_binding(bench, responder_identity(model.identity()));
    EditContext ctx = make_context(config);

    InferenceOptions inference;
    inference.mode = config.inference;
    OptionLikelihoodModel responder(model, templates.get("edit_prompt"));
    const MetricReport pre = evaluate_benchmark(responder, bench, config.seed, templates, inference).report();

    ResultTable table;
    table.title = "Single editing results";
    nlohmann::json rows = nlohmann::json::array();
    const std::string column = column_label(config);
    const nlohmann::json binding = binding_of(bench);
    for (Paradigm p : config.paradigms) {
      auto editor = make_editor(config.method, config.overrides, ctx);
      SingleEditOptions opts;
      opts.paradigm = p;
      opts.layers = config.layers;
      opts.inference = inference;
      opts.seed = config.seed;
      opts.score_qor = config.score_qor;
      opts.max_items = config.max_items;
      SingleEditResult r = run_single_edit(model, *editor, bench, opts, templates, judge.get());
      for (const auto& rec : r.records) {
        nlohmann::json j = rec.to_json();
        j["paradigm"] = to_string(p);
        w.append_record(j);
      }
      const TableCell cell = cell_from_report(r.report);
      const std::string label = row_label(config.method, p);
      table.add(label, column, cell);
      nlohmann::json exclusions = nlohmann::json::object();
      for (const auto& [reason, n] : r.exclusions) exclusions[reason] = n;
      rows.push_back({{"method", config.method},
                      {"paradigm", to_string(p)},
                      {"row", label},
                      {"column", column},
                      {"binding", binding},
                      {"hyperparameters", editor->hyperparameters()},
                      {"cell", {{"eff", opt_json(cell.eff)}, {"gen", opt_json(cell.gen)},
                                {"ret", opt_json(cell.ret)}, {"avg", opt_json(cell.avg)}}},
                      {"metrics", r.report.to_json()},
                      {"exclusions", exclusions}});
      if (model.checksum() != r.base_checksum) throw EditorError("weights were not restored after the run");
    }
    nlohmann::json report{{"command", "edit-eval"},
                          {"model_identity", model.identity()},
                          {"judge_identity", judge ? nlohmann::json(judge->identity()) : nlohmann::json(nullptr)},
                          {"pre_edit", pre.to_json()},
                          {"rows", rows}};
    w.write_json("report.json", report);
    w.write_text("table.csv", table.render_csv());
    w.write_text("table.txt", table.render_text());
    save_transcript(w, judge.get());
    return {w.run_id(), w.dir(), report};
  });
}

CommandResult cmd_seq_run(const RunConfig& config) {
  return with_run(config, [&](RunWriter& w) -> CommandResult {
    const PromptTemplates templates = load_templates(config);
    const EditBenchmark bench = EditBenchmark::load(config.benchmark);
    std::vector<ExternalBenchmark> externals;
    for (const auto& e : config.externals) {
      if (e.kind == "split-mcq") {
        externals.push_back(load_split_mcq(e.path, load_subject_list(e.subjects), e.name.empty() ? "split-mcq" : e.name));
      } else {
        externals.push_back(load_exact_match(e.path, e.name.empty() ? "arithmetic" : e.name));
      }
    }
    auto judge = make_judge(config);
    TransformerModel model = load_model(config.model.path);
    check_binding(bench, responder_identity(model.identity()));
    EditContext ctx = make_context(config);
    const Checkpoint base = model.snapshot();

    const int total = config.edits > 0 ? config.edits : config.checkpoints.back();
    std::vector<int> checkpoints = config.checkpoints.empty() ? checkpoints_for(total) : config.checkpoints;
    if (checkpoints.back() > total) throw ValidationError("checkpoints exceed the edit count");

    SequentialOptions opts;
    opts.bench = &bench;
    for (const auto& e : externals) opts.externals.push_back(&e);
    opts.detect_collapse = config.detect_collapse;
    opts.inference.mode = config.inference;
    opts.templates = &templates;

    std::map<std::string, Trajectory> trajectories;
    nlohmann::json summary{{"command", "seq-run"}, {"model_identity", model.identity()}, {"paradigms", nlohmann::json::object()}};
    for (Paradigm p : config.paradigms) {
      SequentialSchedule schedule;
      schedule.seed = config.seed;
      schedule.layers = config.layers;
      schedule.checkpoints = checkpoints;
      nlohmann::json skipped = nlohmann::json::array();
      for (const auto& item : bench.ori) {
        if (static_cast<int>(schedule.edits.size()) == total) break;
        try {
          schedule.edits.push_back({&item, build_target(p, item, &model, judge.get(), templates, &model.tokenizer())});
        } catch (const ParadigmUnavailable& e) {
          skipped.push_back({{"item_id", item.id}, {"reason", e.reason()}});
        }
      }
      if (static_cast<int>(schedule.edits.size()) < total) {
        throw DataError(fmt::format("only {} of {} edits have a {} target", schedule.edits.size(), total, to_string(p)));
      }
      auto editor = make_editor(config.method, config.overrides, ctx);
      Trajectory t = run_sequential(model, *editor, schedule, opts);
      model.restore(base);
      if (model.checksum() != t.base_checksum) throw EditorError("restore did not return the base checksum");

      const std::string key = to_string(p);
      t.save(w.path("trajectory/" + key));
      const std::string csv = series_to_csv(trajectory_series(t));
      w.write_text("trajectory-" + key + ".csv", csv);
      w.write_text("trajectory-" + key + ".svg",
                   line_chart_svg(fmt::format("{} sequential editing ({})", config.method, key), "number of edits",
                                  "accuracy", series_from_csv(csv)));
      for (const auto& r : t.records) {
        nlohmann::json j = r.to_json();
        j["paradigm"] = key;
        w.append_record(j);
      }
      summary["paradigms"][key] = {{"checkpoints", t.checkpoints},
                                   {"completed", t.records.size()},
                                   {"failure", t.failure ? nlohmann::json{{"edit", t.failure->first},
                                                                          {"cause", t.failure->second}}
                                                         : nlohmann::json(nullptr)},
                                   {"skipped", skipped},
                                   {"final_hash", t.step_hashes.empty() ? t.base_checksum : t.step_hashes.back()}};
      trajectories.emplace(key, std::move(t));
    }
    if (trajectories.size() > 1 && !externals.empty()) {
      w.write_text("drift.csv", compare_paradigm_drift(trajectories).to_csv());
    }
    w.write_json("summary.json", summary);
    save_transcript(w, judge.get());
    return {w.run_id(), w.dir(), summary};
  });
}

CommandResult cmd_layer_sweep(const RunConfig& config) {
  return with_run(config, [&](RunWriter& w) -> CommandResult {
    const PromptTemplates templates = load_templates(config);
    const EditBenchmark bench = EditBenchmark::load(config.benchmark);
    auto judge = make_judge(config);
    TransformerModel model = load_model(config.model.path);
    validate_sweep_groups(config.sweep_groups, model.architecture());
    EditContext ctx = make_context(config);

    SweepOptions opts;
    opts.groups = config.sweep_groups;
    opts.paradigms = config.paradigms;
    opts.sample_size = config.sample_size;
    opts.method = config.method;
    opts.overrides = config.overrides;
    opts.seed = config.seed;
    opts.inference.mode = config.inference;
    const SweepGrid grid = layer_sweep(model, bench, opts, ctx, templates, judge.get());

    const std::string csv = grid.to_csv();
    w.write_text("grid.csv", csv);
    w.write_json("grid.json", grid.to_json());
    w.write_text("grid.svg", heatmap_svg(fmt::format("{} layer sweep (avg)", config.method), heat_from_csv(csv)));

    std::optional<double> best;
    std::string best_layers;
    for (const auto& c : grid.cells) {
      if (c.avg && (!best || *c.avg > *best)) {
        best = c.avg;
        best_layers = grid.groups[c.group].describe();
      }
    }
    nlohmann::json summary{{"command", "layer-sweep"}, {"best_avg", opt_json(best)}, {"best_layers", best_layers}};
    w.write_json("summary.json", summary);
    save_transcript(w, judge.get());
    return {w.run_id(), w.dir(), summary};
  });
}

CommandResult run_command(const RunConfig& config) {
  if (config.command == "bench-build") return cmd_bench_build(config);
  if (config.command == "edit-eval") return cmd_edit_eval(config);
  if (config.command == "seq-run") return cmd_seq_run(config);
  if (config.command == "layer-sweep") return cmd_layer_sweep(config);
  throw ValidationError("unknown command '" + config.command + "'");
}

ResultTable cmd_report(const ResultStore& store, const std::vector<std::string>& run_ids,
                       const ReportOptions& opts) {
  if (run_ids.empty()) throw ValidationError("report needs at least one run id");
  std::vector<std::string> missing;
  for (const auto& id : run_ids) {
    if (!store.exists(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    throw ValidationError(fmt::format("unknown run ids: {}", fmt::join(missing, ", ")));
  }

  ResultTable table;
  table.title = opts.title;
  std::map<std::string, nlohmann::json> column_binding;
  std::vector<std::string> conflicts;
  auto read = [](const nlohmann::json& v) {
    return v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>());
  };
  for (const auto& id : run_ids) {
    const nlohmann::json report = store.read_json(id, "report.json");
    if (report.value("command", std::string()) != "edit-eval") {
      throw ValidationError("run " + id + " is not an edit-eval run");
    }
    for (const auto& row : report.at("rows")) {
      const auto column = row.at("column").get<std::string>();
      const auto& binding = row.at("binding");
      auto [it, inserted] = column_binding.emplace(column, binding);
      if (!inserted && it->second != binding) {
        conflicts.push_back(fmt::format("column '{}': {} vs {}", column, it->second.dump(), binding.dump()));
      }
      const auto& cell = row.at("cell");
      table.add(row.at("row").get<std::string>(), column,
                TableCell{read(cell.at("eff")), read(cell.at("gen")), read(cell.at("ret")), read(cell.at("avg"))});
    }
  }
  if (!conflicts.empty()) {
    if (!opts.allow_mixed_bindings) {
      throw ValidationError(fmt::format("runs mix benchmark bindings:\n  {}", fmt::join(conflicts, "\n  ")));
    }
    table.watermark = "MIXED BINDINGS: rows in a column were evaluated on different benchmarks";
  }
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    std::ofstream(opts.out_dir / "table.csv", std::ios::binary) << table.render_csv();
    std::ofstream(opts.out_dir / "table.txt", std::ios::binary) << table.render_text();
    std::ofstream(opts.out_dir / "table.json", std::ios::binary) << table.to_json().dump(2) << "\n";
  }
  return table;
}

AnnotationCheck check_annotation(const fs::path& path) {
  AnnotatedTable a = load_annotated_table(path);
  AnnotationCheck out{a.table, {}};
  const auto marks = a.table.marks();
  for (std::size_t m = 0; m < marks.size(); ++m) {
    for (std::size_t c = 0; c < marks[m].size(); ++c) {
      if (marks[m][c] != a.printed_marks[m][c]) {
        out.mismatches.push_back(fmt::format("{} / {}: computed '{}', printed '{}'", a.table.methods[m],
                                             a.table.columns[c], to_string(marks[m][c]),
                                             to_string(a.printed_marks[m][c])));
      }
    }
  }
  return out;
}

nlohmann::json cmd_make_fixture(const fs::path& out_dir, int steps) {
  FixtureOptions opts;
  if (steps > 0) opts.pretrain.steps = steps;
  FixtureBuild build = make_fixture_model(opts);
  fs::create_directories(out_dir);
  save_fixture(build.model, out_dir / "model.kefx");
  nlohmann::json info{{"identity", build.model.identity()},
                      {"architecture", build.model.architecture()},
                      {"checksum", build.model.checksum()},
                      {"initial_loss", build.report.initial_loss},
                      {"final_loss", build.report.final_loss},
                      {"steps", build.report.steps}};
  std::ofstream(out_dir / "fixture.json", std::ios::binary) << info.dump(2) << "\n";
  return info;
}

void cmd_plot(const std::string& kind, const fs::path& csv, const fs::path& svg, const std::string& title) {
  const std::string text = read_file(csv);
  std::string out;
  if (kind == "line") {
    out = line_chart_svg(title, "number of edits", "accuracy", series_from_csv(text));
  } else if (kind == "heat") {
    out = heatmap_svg(title, heat_from_csv(text));
  } else {
    throw ValidationError("plot kind must be 'line' or 'heat'");
  }
  std::ofstream f(svg, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + svg.string());
  f << out;
}

}  // namespace kebench
