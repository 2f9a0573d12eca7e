// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "kebench/bench/pipeline.hpp"
#include "kebench/eval/inference.hpp"
#include "kebench/judge/transports.hpp"
#include "kebench/paradigms/paradigms.hpp"
#include "test_util.hpp"

namespace kebench {
namespace {

QAItem src(const std::string& id, bool with_reference = true, const std::string& subject = "general") {
  QAItem q;
  q.id = id;
  q.question = id + "?";
  q.options = {"alpha", "beta", "gamma", "delta"};
  q.answer_letter = 'A';
  q.answer_text = "alpha";
  if (with_reference) q.reference = "Fact about " + id + ".";
  q.subject = subject;
  return q;
}

// Per question: {open-book reply, closed-book reply}. "A" is always gold.
ScriptedModel rig_model() {
  static const std::map<std::string, std::pair<std::string, std::string>> kReplies{
      {"s1?", {"A", "B"}},      // kept as ori
      {"s3?", {"C", "B"}},      // open-book wrong
      {"s4?", {"A", "A"}},      // already known
      {"s5?", {"A", "B"}},      // kept as ori
      {"s6?", {"A", "hmm"}},    // kept as ori through an unparseable reply
      {"gen-s1", {"", "B"}},    // kept: model wrong
      {"ret-s1", {"", "A"}},    // kept: model right
      {"ret-s5", {"", "C"}},    // dropped: model wrong
      {"gen-s6", {"", "A"}},    // dropped: model right
      {"ret-s6", {"", "hmm"}},  // dropped: unparseable
  };
  return ScriptedModel("rig", [](std::string_view prompt, const GenerationOptions&) -> std::string {
    const auto mcq = parse_mcq_prompt(prompt);
    if (!mcq) return "";
    auto it = kReplies.find(mcq->question);
    if (it == kReplies.end()) return "hmm";
    return mcq->reference ? it->second.first : it->second.second;
  });
}

std::shared_ptr<ScriptedTransport> rig_judge() {
  return std::make_shared<ScriptedTransport>("rig-judge", [](const std::string& p, int) -> std::string {
    const bool gen = p.find("places this fact") != std::string::npos;
    const auto at = p.find("Source question: ");
    const std::string id = p.substr(at + 17, p.find('?', at) - at - 17);
    if (id == "s5" && gen) return "I would rather not.";
    return "QUESTION: " + std::string(gen ? "gen-" : "ret-") + id +
           "\nA: alpha\nB: beta\nC: gamma\nD: delta\nANSWER: A";
  });
}

JudgeConfig no_backoff() {
  JudgeConfig c;
  c.backoff_base_ms = 0.0;
  return c;
}

std::vector<QAItem> rig_corpus() {
  return {src("s1"), src("s2", false), src("s3"), src("s4"), src("s5"), src("s6")};
}

TEST(Pipeline, HandTracedFunnel) {
  JudgeClient judge(no_backoff(), rig_judge());
  const auto r = build_benchmark(rig_model(), judge, rig_corpus(), PromptTemplates());
  const auto& rep = r.report;
  EXPECT_EQ(rep.loaded, 6);
  EXPECT_EQ(rep.verified, 4);
  EXPECT_EQ(rep.q_ori, 3);
  EXPECT_EQ(rep.gen_candidates, 2);
  EXPECT_EQ(rep.ret_candidates, 3);
  EXPECT_EQ(rep.q_gen, 1);
  EXPECT_EQ(rep.q_ret, 1);
  EXPECT_EQ(rep.step2_unparseable, 1);
  EXPECT_EQ(rep.step4_unparseable, 1);
  const std::map<std::string, int> expected{
      {"step1:no-reference", 1},        {"step1:wrong-answer", 1},  {"step2:correct-answer", 1},
      {"step3:malformed-generation", 1}, {"step4:wrong-answer", 1}, {"step4:correct-answer", 1},
      {"step4:unparseable", 1}};
  EXPECT_EQ(rep.exclusions, expected);
  EXPECT_TRUE(rep.funnel_monotone());
  EXPECT_EQ(r.benchmark.gen[0].id, "s1-gen");
  EXPECT_EQ(r.benchmark.gen[0].source_id, "s1");
  EXPECT_EQ(r.benchmark.gen[0].reference, src("s1").reference);
  EXPECT_FALSE(r.benchmark.ret[0].reference);

  const auto audit = audit_benchmark(rig_model(), r.benchmark, PromptTemplates());
  EXPECT_EQ(audit.ori, 0.0);
  EXPECT_EQ(audit.gen, 0.0);
  EXPECT_EQ(audit.ret, 1.0);
  EXPECT_TRUE(audit.holds());
}

TEST(Pipeline, MalformedScenarioIsRequestedTwice) {
  int calls = 0;
  auto t = std::make_shared<ScriptedTransport>("bad", [&](const std::string&, int) -> std::string {
    ++calls;
    return "nope";
  });
  JudgeClient judge(no_backoff(), t);
  const auto c = generate_scenarios(judge, src("s1"), PromptTemplates());
  EXPECT_FALSE(c.gen);
  EXPECT_FALSE(c.ret);
  EXPECT_EQ(c.skipped.size(), 2u);
  EXPECT_EQ(calls, 4);
}

TEST(Pipeline, SubjectCap) {
  JudgeClient judge(no_backoff(), rig_judge());
  BuildOptions opts;
  opts.per_subject_cap = 1;
  std::vector<QAItem> corpus{src("s1", true, "a"), src("s5", true, "a"), src("s6", true, "b")};
  const auto r = build_benchmark(rig_model(), judge, corpus, PromptTemplates(), opts);
  EXPECT_EQ(r.report.capped, 2);
  EXPECT_EQ(r.report.q_ori, 2);
}

TEST(Pipeline, RebuildAndReplayAreIdentical) {
  const auto dir = testing::scratch_dir("pipeline");
  JudgeClient first(no_backoff(), rig_judge());
  const auto a = build_benchmark(rig_model(), first, rig_corpus(), PromptTemplates());
  first.transcript().save(dir / "judge.jsonl");

  JudgeClient second(no_backoff(), rig_judge());
  const auto b = build_benchmark(rig_model(), second, rig_corpus(), PromptTemplates());
  JudgeClient replay(no_backoff(), ReplayTransport::load(dir / "judge.jsonl"));
  const auto c = build_benchmark(rig_model(), replay, rig_corpus(), PromptTemplates());

  a.benchmark.save(dir / "a");
  b.benchmark.save(dir / "b");
  c.benchmark.save(dir / "c");
  for (const char* f : {"ori.jsonl", "gen.jsonl", "ret.jsonl", "benchmark.json"}) {
    EXPECT_EQ(testing::slurp(dir / "a" / f), testing::slurp(dir / "b" / f)) << f;
    EXPECT_EQ(testing::slurp(dir / "a" / f), testing::slurp(dir / "c" / f)) << f;
  }
}

TEST(Pipeline, ReviewExportAndStats) {
  JudgeClient judge(no_backoff(), rig_judge());
  const auto r = build_benchmark(rig_model(), judge, rig_corpus(), PromptTemplates());
  const auto dir = testing::scratch_dir("review");
  export_review(dir / "review.jsonl", r.benchmark);
  std::ifstream in(dir / "review.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    EXPECT_TRUE(nlohmann::json::parse(line).at("approved").get<bool>());
    ++n;
  }
  EXPECT_EQ(n, 2);
  const auto stats = corpus_stats(r.benchmark, nullptr);
  EXPECT_EQ(stats.at("ori").count, 3);
  EXPECT_DOUBLE_EQ(stats.at("ori").mean, 1.0);
  EXPECT_THROW(corpus_stats(EditBenchmark{}, nullptr), std::exception);
}

TEST(Pipeline, ShippedFixtureScriptsBuildACleanBenchmark) {
  const auto model = ScriptedModel::load((testing::data_dir() / "fixture" / "scripted_model.json").string());
  JudgeClient judge(no_backoff(), ScriptedTransport::load(testing::data_dir() / "fixture" / "judge_script.json"));
  const auto corpus = load_items(testing::data_dir() / "fixture" / "corpus.jsonl");
  const auto r = build_benchmark(model, judge, corpus.items, PromptTemplates());
  EXPECT_GT(r.report.q_ori, 0);
  EXPECT_GT(r.report.q_gen, 0);
  EXPECT_GT(r.report.q_ret, 0);
  EXPECT_TRUE(r.report.funnel_monotone());
  EXPECT_TRUE(audit_benchmark(model, r.benchmark, PromptTemplates()).holds());
}

}  // namespace
}  // namespace kebench
