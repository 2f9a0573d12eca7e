// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <gtest/gtest.h>

#include "kebench/edit/editor.hpp"
#include "kebench/seq/collapse.hpp"
#include "kebench/seq/harness.hpp"
#include "kebench/substrate/hashing.hpp"
#include "kebench/substrate/random.hpp"
#include "test_util.hpp"

namespace kebench {
namespace {

// Adds a prompt-seeded random matrix to each requested layer; refuses any
// target equal to `poison`.
class ShiftEditor : public Editor {
 public:
  explicit ShiftEditor(std::string poison = "") : poison_(std::move(poison)) {}
  std::string name() const override { return "shift"; }
  nlohmann::json hyperparameters() const override { return nlohmann::json::object(); }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> requests) override {
    EditOutcome out;
    out.method = name();
    for (const auto& r : requests) {
      if (r.target == poison_) throw EditorError("refusing target " + r.target);
      for (int layer : r.layers.layers) model.add_to_weight(layer, Site::kMlpDown, shift(model, r, layer));
    }
    out.weight_hash = model.checksum();
    return out;
  }

  static Matrix shift(const TransformerModel& model, const EditRequest& r, int layer) {
    Rng rng(derive_seed(17, r.prompt + "#" + std::to_string(layer)));
    const auto& a = model.architecture();
    Matrix d(a.d_model, a.d_mlp);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = (rng.uniform() - 0.5) * 1e-2;
    return d;
  }

 private:
  std::string poison_;
};

std::vector<QAItem> items(int n) {
  std::vector<QAItem> out;
  for (int i = 0; i < n; ++i) {
    QAItem q;
    q.id = "e" + std::to_string(i);
    q.question = "What treats ailment " + std::to_string(i) + "?";
    q.options = {"rest", "iron", "honey", "salt"};
    q.answer_letter = 'C';
    q.answer_text = "honey";
    out.push_back(q);
  }
  return out;
}

SequentialSchedule schedule_for(const std::vector<QAItem>& qs, std::vector<int> checkpoints) {
  SequentialSchedule s;
  for (const auto& q : qs) s.edits.push_back({&q, build_gta(q)});
  s.checkpoints = std::move(checkpoints);
  s.layers = {{1}};
  return s;
}

SequentialOptions quiet() {
  SequentialOptions o;
  o.detect_collapse = false;
  return o;
}

TEST(Checkpoints, DefaultsAndTruncation) {
  EXPECT_EQ(default_checkpoints(), (std::vector<int>{1, 5, 10, 20, 30, 50, 100}));
  EXPECT_EQ(checkpoints_for(100), default_checkpoints());
  EXPECT_EQ(checkpoints_for(12), (std::vector<int>{1, 5, 10, 12}));
  EXPECT_EQ(checkpoints_for(1), (std::vector<int>{1}));
}

TEST(Schedule, Validation) {
  const auto qs = items(3);
  EXPECT_NO_THROW(schedule_for(qs, {1, 3}).validate());
  EXPECT_THROW(schedule_for(qs, {1, 4}).validate(), ValidationError);
  EXPECT_THROW(schedule_for(qs, {2, 2}).validate(), ValidationError);
  EXPECT_THROW(schedule_for(qs, {0, 2}).validate(), ValidationError);
  EXPECT_THROW(schedule_for({}, {1}).validate(), ValidationError);
  EXPECT_NE(schedule_for(qs, {1}).checkpoint_seed(1), schedule_for(qs, {1}).checkpoint_seed(2));
}

TEST(Sequential, EditsComposeWithoutRestores) {
  auto model = testing::tiny_model();
  const auto qs = items(5);
  const auto base = model.snapshot();
  const std::string base_sum = model.checksum();
  ShiftEditor editor;
  const auto t = run_sequential(model, editor, schedule_for(qs, {1, 3, 5}), quiet());
  ASSERT_EQ(t.step_hashes.size(), 5u);
  ASSERT_EQ(t.records.size(), 3u);
  EXPECT_EQ(t.records[1].weight_hash, t.step_hashes[2]);
  EXPECT_EQ(t.base_checksum, base_sum);
  const std::string final_sum = model.checksum();

  // Manual composition from the same base must hit every hash bit-exactly.
  model.restore(base);
  EXPECT_EQ(model.checksum(), base_sum);
  const PromptTemplates templates;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EditRequest r = make_edit_request(qs[i], build_gta(qs[i]), {{1}}, templates);
    model.add_to_weight(1, Site::kMlpDown, ShiftEditor::shift(model, r, 1));
    EXPECT_EQ(model.checksum(), t.step_hashes[i]) << i;
  }
  EXPECT_EQ(model.checksum(), final_sum);
}

TEST(Sequential, EditorFailureKeepsThePreviousState) {
  auto model = testing::tiny_model();
  const auto qs = items(4);
  auto s = schedule_for(qs, {1, 4});
  s.edits[2].target.text = "poisoned";
  ShiftEditor editor("poisoned");
  const auto t = run_sequential(model, editor, s, quiet());
  ASSERT_TRUE(t.failure);
  EXPECT_EQ(t.failure->first, 3);
  EXPECT_NE(t.failure->second.find("poisoned"), std::string::npos);
  EXPECT_EQ(t.step_hashes.size(), 2u);
  EXPECT_EQ(model.checksum(), t.step_hashes.back());
  EXPECT_EQ(t.records.size(), 1u);
}

TEST(Sequential, SavedTrajectoryLayout) {
  auto model = testing::tiny_model();
  const auto qs = items(2);
  ShiftEditor editor;
  const auto t = run_sequential(model, editor, schedule_for(qs, {1, 2}), quiet());
  const auto dir = testing::scratch_dir("trajectory");
  t.save(dir / "t");
  EXPECT_TRUE(std::filesystem::exists(dir / "t" / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "t" / "checkpoint-001.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "t" / "checkpoint-002.json"));
  const auto m = nlohmann::json::parse(testing::slurp(dir / "t" / "manifest.json"));
  EXPECT_EQ(m.at("method"), "shift");
}

TEST(External, ExactMatchRule) {
  EXPECT_TRUE(exact_match("54", "54"));
  EXPECT_TRUE(exact_match(" 54, because 9 times 6", "54"));
  EXPECT_TRUE(exact_match("New York city", "new york"));
  EXPECT_FALSE(exact_match("about 54", "54"));
  EXPECT_FALSE(exact_match("", "54"));
  EXPECT_FALSE(exact_match("540", "54"));
}

TEST(External, WeightedOverall) {
  // (0.5 * 10 + 1.0 * 30) / 40
  EXPECT_DOUBLE_EQ(weighted_overall({{"a", 0.5}, {"b", 1.0}}, {{"a", 10}, {"b", 30}}), 35.0 / 40.0);
}

TEST(External, LoadersAndScoring) {
  const auto subjects = load_subject_list(testing::data_dir() / "external" / "medical_subjects.txt");
  const auto split = load_split_mcq(testing::data_dir() / "external" / "split_mcq.jsonl", subjects);
  EXPECT_NO_THROW(split.validate());
  EXPECT_EQ(split.split_names(), (std::vector<std::string>{"medical", "non-medical"}));
  const auto arith = load_exact_match(testing::data_dir() / "external" / "arithmetic.jsonl");
  EXPECT_EQ(arith.split_names(), std::vector<std::string>{"arithmetic"});

  // Always "A": accuracy equals the share of gold-A items per split.
  ScriptedModel always_a("a", {}, "Final answer: A");
  const PromptTemplates t;
  const auto scores = eval_external(always_a, always_a, split, t);
  for (const auto& name : split.split_names()) {
    int n = 0, gold_a = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split.split[i] != name) continue;
      ++n;
      gold_a += split.choice_items[i].answer_letter == 'A';
    }
    EXPECT_EQ(scores.split_size.at(name), n);
    EXPECT_DOUBLE_EQ(scores.split_accuracy.at(name), static_cast<double>(gold_a) / n) << name;
  }
  const auto again = eval_external(always_a, always_a, split, t, &scores);
  ASSERT_TRUE(again.overall_delta);
  EXPECT_DOUBLE_EQ(*again.overall_delta, 0.0);

  ExternalBenchmark bad = split;
  bad.split.pop_back();
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Collapse, RigsTriggerEachSignal) {
  const std::vector<std::string> punct(10, "!!! ??? ... ,,,");
  const auto p = detect_collapse_outputs(punct, std::nullopt, std::nullopt);
  EXPECT_TRUE(p.collapsed);
  EXPECT_EQ(p.triggers, std::vector<std::string>{"alnum-ratio"});

  const std::vector<std::string> repeat(10, "the the the the the the");
  const auto r = detect_collapse_outputs(repeat, std::nullopt, std::nullopt);
  EXPECT_TRUE(r.collapsed);
  EXPECT_EQ(r.top_token, "the");
  EXPECT_DOUBLE_EQ(r.top_token_share, 1.0);

  std::vector<std::string> fluent;
  for (int i = 0; i < 10; ++i) fluent.push_back("patient " + std::to_string(i) + " recovered after rest and fluids");
  EXPECT_FALSE(detect_collapse_outputs(fluent, 0.6, 0.7).collapsed);
  const auto em = detect_collapse_outputs(fluent, 0.0, 0.7);
  EXPECT_TRUE(em.collapsed);
  EXPECT_EQ(em.triggers, std::vector<std::string>{"exact-match-zero"});
  // A baseline already below the floor cannot signal a drop to zero.
  EXPECT_FALSE(detect_collapse_outputs(fluent, 0.0, 0.1).collapsed);

  EXPECT_DOUBLE_EQ(alnum_ratio("ab !"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(alnum_ratio(""), 0.0);
  ScriptedModel m("m", {}, "fine");
  EXPECT_THROW(detect_collapse(m, {"one", "two"}), ValidationError);
}

TEST(Drift, RejectsMismatchedTrajectories) {
  Trajectory a;
  a.model_identity = "m";
  a.checkpoints = {1, 5};
  a.edit_ids = {"x", "y", "z", "w", "v"};
  Trajectory b = a;
  ExternalScores s;
  s.name = "arith";
  s.overall_delta = -0.25;
  s.split_delta = {{"arith", -0.25}};
  CheckpointRecord rec;
  rec.index = 1;
  rec.externals = {s};
  a.records = {rec};
  const auto table = compare_paradigm_drift({{"gta", a}, {"re", b}});
  EXPECT_EQ(table.to_csv(), "key,checkpoint,benchmark,split,delta\ngta,1,arith,overall,-0.250000\n"
                            "gta,1,arith,arith,-0.250000\n");
  b.checkpoints = {1, 4};
  EXPECT_THROW(compare_paradigm_drift({{"gta", a}, {"re", b}}), ValidationError);
  b = a;
  b.model_identity = "other";
  EXPECT_THROW(compare_paradigm_drift({{"gta", a}, {"re", b}}), ValidationError);
}

}  // namespace
}  // namespace kebench
