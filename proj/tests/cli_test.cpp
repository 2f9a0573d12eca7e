// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include <regex>
#include <stdexcept>

#include <gtest/gtest.h>

#include "kebench/cli/commands.hpp"
#include "kebench/cli/plots.hpp"
#include "test_util.hpp"

namespace kebench {
namespace {

namespace fs = std::filesystem;

nlohmann::json bench_build_json(const fs::path& out) {
  const auto d = testing::data_dir() / "fixture";
  return {{"command", "bench-build"},
          {"seed", 1},
          {"model", {{"kind", "scripted"}, {"path", (d / "scripted_model.json").string()}}},
          {"corpus", (d / "corpus.jsonl").string()},
          {"source_name", "fixture"},
          {"judge", {{"mode", "scripted"}, {"path", (d / "judge_script.json").string()}}},
          {"output_dir", out.string()}};
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

TEST(Config, HashIgnoresKeyOrder) {
  const auto a = RunConfig::from_json(nlohmann::json::parse(
      R"({"command": "bench-build", "seed": 3, "corpus": "c.jsonl", "output_dir": "o"})"));
  const auto b = RunConfig::from_json(nlohmann::json::parse(
      R"({"output_dir": "o", "corpus": "c.jsonl", "seed": 3, "command": "bench-build"})"));
  EXPECT_EQ(a.hash(), b.hash());
  auto c = a;
  c.seed = 4;
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(RunConfig::from_json(a.to_json()).hash(), a.hash());
}

TEST(Config, RejectsUnknownKeysAndMissingSeed) {
  EXPECT_THROW(RunConfig::from_json({{"command", "bench-build"}, {"seed", 1}, {"sead", 2}}), ValidationError);
  EXPECT_THROW(RunConfig::from_json({{"command", "bench-build"}}), ValidationError);
}

TEST(Config, OverridesParseJsonOrFallBackToStrings) {
  nlohmann::json j = {{"seed", 1}};
  apply_override(j, "seed=7");
  apply_override(j, "judge.config.model=judge-x");
  apply_override(j, "layers=[1,2]");
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["judge"]["config"]["model"], "judge-x");
  EXPECT_EQ(j["layers"], nlohmann::json::array({1, 2}));
  EXPECT_THROW(apply_override(j, "novalue"), ValidationError);
  EXPECT_THROW(apply_override(j, "seed.x=1"), ValidationError);
}

TEST(Config, ValidationReportsEveryProblemAtOnce) {
  auto j = bench_build_json(testing::scratch_dir("cfg-bad"));
  j["corpus"] = "/nonexistent/corpus.jsonl";
  j.erase("judge");
  j["per_subject_cap"] = -1;
  const auto cfg = RunConfig::from_json(j);
  const std::string msg = message_of([&] { cfg.validate(); });
  EXPECT_NE(msg.find("corpus"), std::string::npos);
  EXPECT_NE(msg.find("needs a judge"), std::string::npos);
  EXPECT_NE(msg.find("per_subject_cap"), std::string::npos);
}

TEST(Config, EditCommandsNeedATransformerAndDisjointSweeps) {
  auto j = bench_build_json(testing::scratch_dir("cfg-sweep"));
  j["command"] = "layer-sweep";
  j["sweep_groups"] = {{1, 2}, {2, 3}};
  const auto cfg = RunConfig::from_json(j);
  const std::string msg = message_of([&] { cfg.validate(); });
  EXPECT_NE(msg.find("needs a transformer"), std::string::npos);
  EXPECT_NE(msg.find("layer 2 appears in more than one sweep group"), std::string::npos);
}

TEST(Store, RunIdFormat) {
  const auto when = std::chrono::sys_days{std::chrono::year{2026} / 3 / 4} + std::chrono::hours{5} +
                    std::chrono::minutes{6} + std::chrono::seconds{7} + std::chrono::milliseconds{89};
  EXPECT_EQ(make_run_id(std::string(64, 'a'), when), "aaaaaaaaaaaaaaaa-20260304T050607089Z");
}

TEST(Store, RunsAreImmutable) {
  const auto root = testing::scratch_dir("store");
  ResultStore store(root);
  const auto cfg = RunConfig::from_json(bench_build_json(root));
  auto w = store.create(cfg, std::chrono::system_clock::now() - std::chrono::seconds(1));
  EXPECT_TRUE(store.exists(w.run_id()));
  EXPECT_EQ(store.read_json(w.run_id(), "config.json").at("config_hash"), cfg.hash());
  w.write_text("a.txt", "one");
  EXPECT_THROW(w.write_text("a.txt", "two"), ValidationError);
  EXPECT_THROW(w.write_json("config.json", {}), ValidationError);
  w.append_record({{"i", 1}});
  w.append_record({{"i", 2}});
  EXPECT_EQ(testing::slurp(w.path("records.jsonl")), "{\"i\":1}\n{\"i\":2}\n");
  const auto t = std::chrono::system_clock::now();
  auto first = store.create(cfg, t);
  EXPECT_THROW(store.create(cfg, t), ValidationError);
  EXPECT_THROW(store.run_dir("no-such-run"), ValidationError);
  EXPECT_EQ(store.list().size(), 2u);
}

TEST(Store, DirectoryLockIsExclusive) {
  const auto root = testing::scratch_dir("lock");
  {
    DirectoryLock held(root);
    EXPECT_THROW(DirectoryLock{root}, ValidationError);
  }
  EXPECT_NO_THROW(DirectoryLock{root});
}

TEST(ExitCodes, FollowErrorCategories) {
  EXPECT_EQ(exit_code_for(ValidationError("x")), 2);
  EXPECT_EQ(exit_code_for(TransportError("x")), 3);
  EXPECT_EQ(exit_code_for(EditorError("x")), 4);
  EXPECT_EQ(exit_code_for(DataError("x")), 5);
  EXPECT_EQ(exit_code_for(UndefinedMetricError("x")), 6);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

TEST(Plots, CsvRoundTripRegeneratesTheSameSvg) {
  std::vector<Series> s{{"gta/efficacy", {1, 5, 10}, {1.0, 0.8, 0.5}}, {"re/efficacy", {1, 5, 10}, {0.2, 0.1, 0.0}}};
  const std::string csv = series_to_csv(s);
  EXPECT_EQ(series_to_csv(series_from_csv(csv)), csv);
  EXPECT_EQ(line_chart_svg("t", "edits", "score", series_from_csv(csv)),
            line_chart_svg("t", "edits", "score", series_from_csv(csv)));
  EXPECT_EQ(csv.substr(0, 11), "series,x,y\n");

  const std::string grid = "layers,bucket,n_items,avg\n1,<10,4,0.500000\n1,50-100,0,\n2,<10,4,0.750000\n2,50-100,1,1.000000\n";
  const auto h = heat_from_csv(grid);
  EXPECT_EQ(h.rows, (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(h.cols, (std::vector<std::string>{"<10", "50-100"}));
  EXPECT_FALSE(h.values[0][1]);
  EXPECT_DOUBLE_EQ(*h.values[1][0], 0.75);
  const auto svg = heatmap_svg("sweep", h);
  EXPECT_EQ(svg, heatmap_svg("sweep", heat_from_csv(grid)));
  EXPECT_NE(svg.find("&lt;10"), std::string::npos);
}

TEST(Commands, BenchBuildWritesACompleteRunAndRebuildsIdentically) {
  const auto root = testing::scratch_dir("cmd-build");
  const auto cfg = RunConfig::from_json(bench_build_json(root));
  const auto a = cmd_bench_build(cfg);
  const auto b = cmd_bench_build(cfg);
  EXPECT_NE(a.run_id, b.run_id);
  for (const char* f : {"ori.jsonl", "gen.jsonl", "ret.jsonl", "benchmark.json"}) {
    EXPECT_EQ(testing::slurp(a.run_dir / "benchmark" / f), testing::slurp(b.run_dir / "benchmark" / f)) << f;
  }
  const auto status = nlohmann::json::parse(testing::slurp(a.run_dir / "status.json"));
  EXPECT_EQ(status.at("status"), "complete");
  for (const char* f : {"config.json", "build_report.json", "build_report.txt", "review.jsonl", "records.jsonl"}) {
    EXPECT_TRUE(fs::exists(a.run_dir / f)) << f;
  }
  const auto report = nlohmann::json::parse(testing::slurp(a.run_dir / "build_report.json"));
  EXPECT_TRUE(report.at("funnel_monotone").get<bool>());
}

TEST(Commands, InvalidConfigCreatesNoRun) {
  const auto root = testing::scratch_dir("cmd-invalid");
  auto j = bench_build_json(root);
  j["corpus"] = (root / "missing.jsonl").string();
  EXPECT_THROW(cmd_bench_build(RunConfig::from_json(j)), ValidationError);
  EXPECT_TRUE(ResultStore(root).list().empty());
}

// Writes a fake edit-eval run with one row per (row, column, binding).
std::string fake_eval_run(ResultStore& store, const std::string& row, const std::string& column,
                          const std::string& bench_hash, double avg, int offset_ms) {
  auto cfg = RunConfig::from_json(bench_build_json(store.root()));
  cfg.label = row;
  auto w = store.create(cfg, std::chrono::system_clock::now() + std::chrono::milliseconds(offset_ms));
  nlohmann::json r{{"command", "edit-eval"},
                   {"rows",
                    {{{"row", row},
                      {"column", column},
                      {"binding", {{"model_identity", "m"}, {"benchmark_hash", bench_hash}}},
                      {"cell", {{"eff", avg}, {"gen", avg}, {"ret", avg}, {"avg", avg}}}}}}};
  w.write_json("report.json", r);
  return w.run_id();
}

TEST(Commands, ReportRejectsMixedBindingsUnlessAllowed) {
  const auto root = testing::scratch_dir("report");
  ResultStore store(root);
  const auto r1 = fake_eval_run(store, "memit", "fixture", "h1", 70.0, 0);
  const auto r2 = fake_eval_run(store, "rome", "fixture", "h1", 60.0, 5);
  const auto r3 = fake_eval_run(store, "grace", "fixture", "h2", 50.0, 10);

  const auto ok = cmd_report(store, {r1, r2}, {});
  EXPECT_EQ(ok.methods, (std::vector<std::string>{"memit", "rome"}));
  EXPECT_EQ(ok.marks()[0][0], Mark::kBest);
  EXPECT_TRUE(ok.watermark.empty());

  EXPECT_THROW(cmd_report(store, {r1, r3}, {}), ValidationError);
  ReportOptions allow;
  allow.allow_mixed_bindings = true;
  allow.out_dir = root / "merged";
  const auto mixed = cmd_report(store, {r1, r3}, allow);
  EXPECT_FALSE(mixed.watermark.empty());
  EXPECT_NE(testing::slurp(root / "merged" / "table.txt").find("WARNING"), std::string::npos);
  EXPECT_THROW(cmd_report(store, {r1, "unknown-run"}, {}), ValidationError);
}

TEST(Commands, PublishedAnnotationMarkersMatch) {
  const auto check = check_annotation(testing::data_dir() / "annotations" / "published_single_edit.json");
  EXPECT_TRUE(check.matches());
  EXPECT_EQ(check.table.columns.size(), 6u);
  EXPECT_EQ(check.table.methods.size(), 6u);
}

}  // namespace
}  // namespace kebench
