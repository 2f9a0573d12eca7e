// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>

#include "kebench/common.hpp"
#include "kebench/judge/structured.hpp"
#include "kebench/judge/transports.hpp"
#include "test_util.hpp"

namespace kebench {
namespace {

JudgeConfig quick_config(int attempts = 3) {
  JudgeConfig c;
  c.max_attempts = attempts;
  c.backoff_base_ms = 0.0;
  return c;
}

TEST(JudgeClient, ScriptedReplyIsReturned) {
  JudgeClient judge(quick_config(), std::make_shared<ScriptedTransport>(
                                        "s", std::vector<ScriptedTransport::Rule>{{{"ping"}, "OK"}}, "?"));
  EXPECT_EQ(judge.complete("ping please"), "OK");
  EXPECT_EQ(judge.complete("other"), "?");
  EXPECT_THROW(judge.complete(""), ValidationError);
  EXPECT_EQ(judge.transcript().entries().size(), 2u);
}

TEST(JudgeClient, RetriesUntilSuccess) {
  auto t = std::make_shared<ScriptedTransport>("flaky", [](const std::string&, int attempt) -> std::string {
    if (attempt < 3) throw TransportError("temporary");
    return "done";
  });
  JudgeClient judge(quick_config(3), t);
  EXPECT_EQ(judge.complete("q"), "done");
  const auto entries = judge.transcript().entries();
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[2].attempt, 3);
  EXPECT_FALSE(entries[0].error.empty());
}

TEST(JudgeClient, PermanentFailureSurfacesAfterMaxAttempts) {
  auto t = std::make_shared<ScriptedTransport>("down", [](const std::string&, int) -> std::string {
    throw TransportError("refused");
  });
  JudgeClient judge(quick_config(2), t);
  try {
    judge.complete("q");
    FAIL() << "expected a transport error";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("2 attempts"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("refused"), std::string::npos);
  }
  EXPECT_EQ(judge.transcript().entries().size(), 2u);
}

TEST(JudgeClient, ConcurrencyNeverExceedsTheCap) {
  std::atomic<int> in_flight{0}, peak{0};
  auto t = std::make_shared<ScriptedTransport>("count", [&](const std::string&, int) -> std::string {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return "ok";
  });
  JudgeConfig c = quick_config();
  c.concurrency = 2;
  JudgeClient judge(c, t);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { judge.complete("prompt " + std::to_string(i)); });
  }
  for (auto& th : threads) th.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(judge.transcript().entries().size(), 8u);
}

TEST(JudgeClient, ReplayReproducesRecordedResponses) {
  JudgeClient live(quick_config(), std::make_shared<ScriptedTransport>(
                                       "s", std::vector<ScriptedTransport::Rule>{{{"a"}, "first"}}, "second"));
  live.complete("a?");
  live.complete("b?");
  const auto dir = testing::scratch_dir("replay");
  live.transcript().save(dir / "t.jsonl");
  JudgeClient replay(quick_config(1), ReplayTransport::load(dir / "t.jsonl"));
  EXPECT_EQ(replay.complete("a?"), "first");
  EXPECT_EQ(replay.complete("b?"), "second");
  EXPECT_THROW(replay.complete("never recorded"), TransportError);
  EXPECT_EQ(replay.transcript().mode(), TranscriptMode::kRecorded);
}

TEST(JudgeConfig, CredentialIsOnlyAnEnvironmentVariableName) {
  JudgeConfig c = quick_config();
  c.credential_env = "sk-live-abcdef123";
  EXPECT_THROW(c.validate(), ValidationError);
  c.credential_env = "KEBENCH_TEST_JUDGE_KEY";
  EXPECT_NO_THROW(c.validate());
}

TEST(JudgeConfig, SerializedStateCarriesNoSecret) {
  const std::string secret = "sekret-token-value-42";
  ::setenv("KEBENCH_TEST_JUDGE_KEY", secret.c_str(), 1);
  JudgeConfig c = quick_config();
  c.endpoint = "https://judge.invalid";
  c.model = "judge-model";
  c.credential_env = "KEBENCH_TEST_JUDGE_KEY";
  // Constructing the live transport reads the key; nothing is sent.
  JudgeClient judge(c, std::make_shared<HttpTransport>(c));
  const std::string dumped = judge.metadata().dump() + c.to_json().dump() + judge.transcript().to_jsonl();
  EXPECT_EQ(dumped.find(secret), std::string::npos);
  EXPECT_NE(dumped.find("KEBENCH_TEST_JUDGE_KEY"), std::string::npos);
  ::unsetenv("KEBENCH_TEST_JUDGE_KEY");
  EXPECT_THROW(HttpTransport{c}, ValidationError);
}

TEST(Structured, FactualityVerdicts) {
  const auto v = parse_factuality("score: 5, hallucination: no");
  EXPECT_EQ(v.score, 5);
  EXPECT_FALSE(v.hallucination);
  EXPECT_TRUE(parse_factuality("Hallucination: YES; Score: 2").hallucination);
  EXPECT_THROW(parse_factuality("score: 7"), ParseError);
  EXPECT_THROW(parse_factuality("looks fine"), ParseError);
}

TEST(Structured, QorScoresNormalizeOverTwentyFive) {
  const auto q = parse_qor(
      "factual_accuracy: 5\nlogical flow: 5\nrelevance: 4\ncompleteness: 5\nanswer_correctness: 5");
  EXPECT_DOUBLE_EQ(q.normalized(), 24.0 / 25.0);
  EXPECT_THROW(parse_qor("factual_accuracy: 5"), ParseError);
  EXPECT_THROW(parse_qor("factual_accuracy: 9\nlogical_flow: 1\nrelevance: 1\ncompleteness: 1\nanswer_correctness: 1"),
               ParseError);
}

TEST(Structured, ScenarioDrafts) {
  const auto d = parse_scenario("QUESTION: What helps?\nA: rest\nB: salt\nC: sugar\nD: sand\nANSWER: A");
  EXPECT_EQ(d.question, "What helps?");
  EXPECT_EQ(d.options[3], "sand");
  EXPECT_EQ(d.answer, 'A');
  EXPECT_THROW(parse_scenario("QUESTION: x\nA: 1\nB: 2\nC: 3\nANSWER: A"), ParseError);
}

TEST(Structured, OneReformatReprompt) {
  int calls = 0;
  auto t = std::make_shared<ScriptedTransport>("fmt", [&](const std::string& prompt, int) -> std::string {
    ++calls;
    return prompt.find(kReformatNote) != std::string::npos ? "score: 4, hallucination: no" : "great answer";
  });
  JudgeClient judge(quick_config(), t);
  const auto v = complete_structured<FactualityVerdict>(judge, "rate this", parse_factuality);
  EXPECT_EQ(v.score, 4);
  EXPECT_EQ(calls, 2);

  auto never = std::make_shared<ScriptedTransport>("bad", [](const std::string&, int) -> std::string { return "no"; });
  JudgeClient stubborn(quick_config(), never);
  EXPECT_THROW(complete_structured<FactualityVerdict>(stubborn, "rate", parse_factuality), ParseError);
  EXPECT_EQ(stubborn.transcript().entries().size(), 2u);
}

}  // namespace
}  // namespace kebench
