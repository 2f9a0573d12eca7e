// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include <gtest/gtest.h>

#include "kebench/eval/lexical_metrics.hpp"
#include "kebench/eval/single_edit.hpp"
#include "kebench/judge/transports.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace kebench {
namespace {

const std::vector<std::string> kOpts{"Vitamin A", "Vitamin C", "Vitamin D", "Vitamin K"};

QAItem item(const std::string& id, const std::string& set = "ori", const std::string& source = "") {
  QAItem q;
  q.id = id;
  q.question = "Which vitamin prevents scurvy (" + id + ")?";
  q.options = kOpts;
  q.answer_letter = 'B';
  q.answer_text = "Vitamin C";
  q.reference = "Vitamin C prevents scurvy.";
  q.set = set;
  q.source_id = source;
  return q;
}

// Answers by matching the gold text among the rendered options.
ScriptedModel content_mock() {
  return ScriptedModel("content", [](std::string_view prompt, const GenerationOptions&) -> std::string {
    const auto mcq = parse_mcq_prompt(prompt);
    for (std::size_t i = 0; mcq && i < mcq->options.size(); ++i) {
      if (mcq->options[i] == "Vitamin C") return std::string("reasoning\nFinal answer: ") + char('A' + i);
    }
    return "no idea";
  });
}

TEST(Extraction, Cascade) {
  EXPECT_EQ(extract_answer("Because of collagen.\nFinal answer: C", kOpts), 'C');
  EXPECT_EQ(extract_answer("final answer - (d)", kOpts), std::nullopt);  // lowercase is not a letter
  EXPECT_EQ(extract_answer("I pick B.", kOpts), 'B');
  EXPECT_EQ(extract_answer("B", kOpts), 'B');
  EXPECT_EQ(extract_answer("The answer is vitamin d", kOpts), 'C');
  // "A patient" is prose, not option A.
  EXPECT_EQ(extract_answer("A patient needs vitamin k daily", kOpts), 'D');
  EXPECT_EQ(extract_answer("vitamin a or vitamin k", kOpts), std::nullopt);
  EXPECT_EQ(extract_answer("nothing useful", kOpts), std::nullopt);
  // Letters outside the option range never count.
  EXPECT_EQ(extract_answer("E", kOpts), std::nullopt);
}

TEST(Permutation, SeedZeroIsIdentityAndMapsAreBijections) {
  const QAItem q = item("p");
  const auto same = permute_options(q, 0);
  EXPECT_TRUE(same.map.is_identity());
  EXPECT_EQ(same.item, q);
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto p = permute_options(q, seed);
    std::set<int> seen(p.map.order.begin(), p.map.order.end());
    ASSERT_EQ(seen.size(), 4u);
    EXPECT_EQ(p.item.options[p.item.answer_index()], "Vitamin C");
    for (char c = 'A'; c <= 'D'; ++c) {
      EXPECT_EQ(p.map.to_original(p.map.to_permuted(c)), c);
      EXPECT_EQ(p.map.inverse().to_permuted(c), p.map.to_original(c));
    }
    EXPECT_EQ(permute_options(q, seed).map.order, p.map.order);
  }
}

TEST(Accuracy, HandTallyAndErrors) {
  const auto preds = oracle::thirty_item_set();
  EXPECT_DOUBLE_EQ(score_accuracy(preds, "ori"), 19.0 / 30.0);
  const auto counts = tally(preds);
  EXPECT_EQ(counts.correct, 19);
  EXPECT_EQ(counts.unextractable, 3);
  EXPECT_THROW(score_accuracy(std::vector<Prediction>{}, "ori"), UndefinedMetricError);
  EXPECT_THROW(score_accuracy(preds, "gen"), ValidationError);
}

TEST(Accuracy, ContentMockIsPermutationInvariant) {
  const auto model = content_mock();
  const PromptTemplates t;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_TRUE(infer(model, item("x"), "ori", seed, t).correct()) << seed;
  }
}

TEST(Accuracy, FixedLetterMockFallsToChance) {
  ScriptedModel always_a("fixed", {}, "Final answer: A");
  const PromptTemplates t;
  int correct = 0;
  const int trials = 500;
  for (int i = 0; i < trials; ++i) {
    correct += infer(always_a, item("x"), "ori", derive_seed(7, "trial-" + std::to_string(i)), t).correct();
  }
  const double rate = static_cast<double>(correct) / trials;
  EXPECT_NEAR(rate, 0.25, 2.576 * std::sqrt(0.25 * 0.75 / trials));
}

TEST(Lexical, MatchesIndependentOracles) {
  for (const auto& [c, r] : oracle::text_pairs(200, 99)) {
    const auto ct = word_tokens(c), rt = word_tokens(r);
    EXPECT_NEAR(rouge_l(c, r), oracle::rouge_l(ct, rt), 1e-12) << c << " | " << r;
    EXPECT_NEAR(bleu(c, r), oracle::bleu(ct, rt), 1e-12) << c << " | " << r;
  }
}

TEST(Lexical, KnownValues) {
  EXPECT_DOUBLE_EQ(rouge_l("a b c d", "a b c d"), 1.0);
  EXPECT_DOUBLE_EQ(bleu("a b c d e", "a b c d e"), 1.0);
  EXPECT_DOUBLE_EQ(rouge_l("", "a"), 0.0);
  EXPECT_DOUBLE_EQ(bleu("x y", "a b"), 0.0);
  // LCS "a c" of 3 vs 2 words: p = 2/3, r = 1.
  EXPECT_NEAR(rouge_l("a b c", "a c"), 0.8, 1e-12);
  EXPECT_EQ(word_tokens("Vitamin-C, 500mg!"), (std::vector<std::string>{"vitamin", "c", "500mg"}));
}

TEST(Table, MarksAtDisplayPrecision) {
  ResultTable t;
  t.add("m1", "col", {1, 1, 1, 50.04});
  t.add("m2", "col", {1, 1, 1, 49.96});  // displays as 50.0: tied best
  t.add("m3", "col", {1, 1, 1, 40.0});
  t.add("m4", "col", {1, 1, 1, std::nullopt});
  const auto m = t.marks();
  EXPECT_EQ(m[0][0], Mark::kBest);
  EXPECT_EQ(m[1][0], Mark::kBest);
  EXPECT_EQ(m[2][0], Mark::kSecond);
  EXPECT_EQ(m[3][0], Mark::kNone);
  const auto text = t.render_text();
  EXPECT_NE(text.find("**50.0**"), std::string::npos);
  EXPECT_NE(text.find("__40.0__"), std::string::npos);
  EXPECT_NE(t.render_csv().find("m3,col,1.0,1.0,1.0,40.0,underline"), std::string::npos);
}

TEST(Table, PublishedAnnotationsReproduce) {
  const auto annotated = load_annotated_table(testing::data_dir() / "annotations" / "published_single_edit.json");
  EXPECT_EQ(annotated.table.marks(), annotated.printed_marks);
}

TEST(Metrics, UndefinedSetsPropagate) {
  MetricReport r;
  r.ori = {2, 1, 0, 0};
  r.gen = {0, 0, 0, 0};
  r.ret = {4, 4, 0, 0};
  EXPECT_EQ(r.generalization(), std::nullopt);
  EXPECT_EQ(r.avg(), std::nullopt);
  EXPECT_TRUE(r.to_json()["avg"].is_null());
  r.gen = {3, 0, 3, 0};
  EXPECT_DOUBLE_EQ(*r.avg(), (0.5 + 0.0 + 1.0) / 3.0);
  EXPECT_DOUBLE_EQ(r.unextractable_rate(), 3.0 / 9.0);
}

TEST(Metrics, QorScoringAndCoverage) {
  JudgeConfig c;
  c.backoff_base_ms = 0.0;
  JudgeClient judge(c, std::make_shared<ScriptedTransport>(
                           "j", std::vector<ScriptedTransport::Rule>{},
                           "factual_accuracy: 5\nlogical_flow: 5\nrelevance: 4\ncompleteness: 5\n"
                           "answer_correctness: 5"));
  Prediction p;
  p.item_id = "x";
  p.rationale = "collagen needs vitamin C";
  const auto q = score_qor(judge, p, item("x"), PromptTemplates());
  ASSERT_TRUE(q);
  EXPECT_DOUBLE_EQ(q->normalized(), 0.96);

  JudgeClient broken(c, std::make_shared<ScriptedTransport>("b", std::vector<ScriptedTransport::Rule>{}, "??"));
  EXPECT_EQ(score_qor(broken, p, item("x"), PromptTemplates()), std::nullopt);
  p.rationale.reset();
  EXPECT_THROW(score_qor(judge, p, item("x"), PromptTemplates()), ValidationError);
}

TEST(Inference, PromptParsingAndModes) {
  const PromptTemplates t;
  const auto prompt = t.render("infer_two_step", item_prompt_fields(item("x")));
  const auto mcq = parse_mcq_prompt(prompt);
  ASSERT_TRUE(mcq);
  EXPECT_EQ(mcq->options, kOpts);
  EXPECT_TRUE(mcq->wants_rationale);
  EXPECT_FALSE(mcq->reference);
  const auto open = parse_mcq_prompt(t.render("mcq_open_book", item_prompt_fields(item("x"))));
  ASSERT_TRUE(open);
  EXPECT_EQ(open->reference, "Vitamin C prevents scurvy.");
  EXPECT_FALSE(parse_mcq_prompt("hello"));
  EXPECT_EQ(inference_mode_from_string("one-step"), InferenceMode::kOneStep);
  EXPECT_THROW(inference_mode_from_string("three-step"), ValidationError);

  ScriptedModel long_winded("lw", {}, "Because.\nFinal answer: B");
  const auto pred = infer(long_winded, item("x"), "ori", 0, t);
  EXPECT_EQ(pred.rationale, "Because.");
  EXPECT_TRUE(pred.correct());
}

TEST(Benchmark, ProvenanceBindingAndEvaluation) {
  EditBenchmark b;
  b.model_identity = "content";
  b.ori = {item("o1"), item("o2")};
  b.gen = {item("g1", "gen", "o1")};
  b.ret = {item("r1", "ret", "o1"), item("r2", "ret", "o2")};
  EXPECT_NO_THROW(b.check_provenance());
  EXPECT_EQ(b.linked(b.ret, "o1").size(), 1u);
  EXPECT_NO_THROW(check_binding(b, "content"));
  try {
    check_binding(b, "other-model");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("other-model"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("content"), std::string::npos);
  }

  const auto eval = evaluate_benchmark(content_mock(), b, 3, PromptTemplates(), {});
  const auto r = eval.report();
  EXPECT_EQ(r.ori.total, 2);
  EXPECT_EQ(r.gen.total, 1);
  EXPECT_DOUBLE_EQ(*r.efficacy(), 1.0);

  const auto dir = testing::scratch_dir("bench");
  b.save(dir);
  const auto loaded = EditBenchmark::load(dir);
  EXPECT_EQ(loaded.ori, b.ori);
  EXPECT_EQ(loaded.ret, b.ret);

  b.gen[0].source_id = "missing";
  EXPECT_THROW(b.check_provenance(), DataError);
}

TEST(Seeds, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_EQ(derive_seed(0, "a"), 0u);
}

}  // namespace
}  // namespace kebench
