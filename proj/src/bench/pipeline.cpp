// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/bench/pipeline.hpp"

#include <fstream>

#include <fmt/format.h>

#include "kebench/common.hpp"
#include "kebench/eval/inference.hpp"
#include "kebench/judge/structured.hpp"
#include "kebench/paradigms/paradigms.hpp"

namespace kebench {
namespace {

QAItem from_draft(const ScenarioDraft& d, const QAItem& source, const std::string& set) {
  QAItem item;
  item.id = source.id + "-" + set;
  item.question = d.question;
  item.options.assign(d.options.begin(), d.options.end());
  item.answer_letter = d.answer;
  item.answer_text = fmt::format("{}: {}", d.answer, d.options[d.answer - 'A']);
  // A generalization item rests on the source fact; a retention item does not.
  if (set == "gen") item.reference = source.reference;
  item.subject = source.subject;
  item.set = set;
  item.source_id = source.id;
  item.validate();
  return item;
}

StepDecision closed_book(const LanguageModel& model, const QAItem& item,
                         const PromptTemplates& templates, bool keep_when_correct) {
  const McqAnswer a = ask_mcq(model, item, false, templates);
  StepDecision d{item.id, false, "", a.raw_output};
  if (!a.letter) {
    d.keep = !keep_when_correct;
    d.reason = "unparseable";
    return d;
  }
  const bool correct = *a.letter == item.answer_letter;
  d.keep = correct == keep_when_correct;
  d.reason = d.keep ? "kept" : (correct ? "correct-answer" : "wrong-answer");
  return d;
}

}  // namespace

StepDecision reference_check(const LanguageModel& model, const QAItem& item,
                             const PromptTemplates& templates) {
  if (!item.reference || item.reference->empty()) return {item.id, false, "no-reference", ""};
  const McqAnswer a = ask_mcq(model, item, true, templates);
  StepDecision d{item.id, false, "", a.raw_output};
  if (!a.letter) {
    d.reason = "unparseable";
  } else if (*a.letter != item.answer_letter) {
    d.reason = "wrong-answer";
  } else {
    d.keep = true;
    d.reason = "kept";
  }
  return d;
}

FilterResult zero_shot_filter(const LanguageModel& model, const std::vector<QAItem>& verified,
                              const PromptTemplates& templates) {
  FilterResult r;
  for (const auto& item : verified) {
    StepDecision d = closed_book(model, item, templates, false);
    r.unparseable += d.reason == "unparseable" ? 1 : 0;
    if (d.keep) r.kept.push_back(item);
    r.decisions.push_back(std::move(d));
  }
  return r;
}

ScenarioCandidates generate_scenarios(JudgeClient& judge, const QAItem& source,
                                      const PromptTemplates& templates) {
  ScenarioCandidates out;
  const auto fields = item_prompt_fields(source);
  for (const std::string set : {"gen", "ret"}) {
    const std::string prompt = templates.render(set == "gen" ? "scenario_gen" : "scenario_ret", fields);
    try {
      const auto draft =
          complete_structured<ScenarioDraft>(judge, prompt, parse_scenario);
      QAItem item = from_draft(draft, source, set);
      (set == "gen" ? out.gen : out.ret) = std::move(item);
    } catch (const DataError& e) {
      out.skipped.push_back({source.id + "-" + set, false, "malformed-generation", e.what()});
    } catch (const ValidationError& e) {
      out.skipped.push_back({source.id + "-" + set, false, "malformed-generation", e.what()});
    }
  }
  return out;
}

CandidateFilterResult filter_candidates(const LanguageModel& model, const std::vector<QAItem>& gen,
                                        const std::vector<QAItem>& ret,
                                        const PromptTemplates& templates) {
  CandidateFilterResult r;
  for (const auto& item : gen) {
    StepDecision d = closed_book(model, item, templates, false);
    r.unparseable += d.reason == "unparseable" ? 1 : 0;
    if (d.keep) r.gen.push_back(item);
    r.decisions.push_back(std::move(d));
  }
  for (const auto& item : ret) {
    StepDecision d = closed_book(model, item, templates, true);
    r.unparseable += d.reason == "unparseable" ? 1 : 0;
    if (d.keep) r.ret.push_back(item);
    r.decisions.push_back(std::move(d));
  }
  return r;
}

nlohmann::json LengthStats::to_json() const {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [edge, n] : histogram) hist[fmt::format("{}-{}", edge, edge + 9)] = n;
  return {{"count", count}, {"mean", mean}, {"histogram", hist}};
}

LengthStats length_stats(const std::vector<QAItem>& items, const Tokenizer* tok) {
  LengthStats s;
  double total = 0.0;
  for (const auto& item : items) {
    const int n = count_tokens(tok, item.question);
    ++s.count;
    total += n;
    ++s.histogram[(n / 10) * 10];
  }
  if (s.count > 0) s.mean = total / s.count;
  return s;
}

std::map<std::string, LengthStats> corpus_stats(const EditBenchmark& bench, const Tokenizer* tok) {
  if (bench.ori.empty() && bench.gen.empty() && bench.ret.empty()) {
    throw UndefinedMetricError("corpus statistics of an empty benchmark");
  }
  return {{"ori", length_stats(bench.ori, tok)},
          {"gen", length_stats(bench.gen, tok)},
          {"ret", length_stats(bench.ret, tok)}};
}

bool BuildReport::funnel_monotone() const {
  return loaded >= capped && capped >= verified && verified >= q_ori && q_ori >= gen_candidates &&
         q_ori >= ret_candidates && gen_candidates >= q_gen && ret_candidates >= q_ret;
}

nlohmann::json BuildReport::to_json() const {
  nlohmann::json lens = nlohmann::json::object();
  for (const auto& [k, v] : lengths) lens[k] = v.to_json();
  return {{"source", source_name},
          {"model_identity", model_identity},
          {"judge_identity", judge_identity},
          {"funnel",
           {{"loaded", loaded},
            {"load_errors", load_errors},
            {"after_cap", capped},
            {"verified", verified},
            {"q_ori", q_ori},
            {"gen_candidates", gen_candidates},
            {"ret_candidates", ret_candidates},
            {"q_gen", q_gen},
            {"q_ret", q_ret}}},
          {"unparseable",
           {{"step1_dropped", step1_unparseable},
            {"step2_incorrect", step2_unparseable},
            {"step4_incorrect", step4_unparseable}}},
          {"exclusions", exclusions},
          {"token_lengths", lens},
          {"funnel_monotone", funnel_monotone()}};
}

std::string BuildReport::summary() const {
  std::string out = fmt::format("Benchmark build for {} on {}\n", model_identity, source_name);
  out += fmt::format("  loaded {} ({} line errors), after cap {}\n", loaded, load_errors, capped);
  out += fmt::format("  step 1 reference check: {} verified ({} unparseable)\n", verified,
                     step1_unparseable);
  out += fmt::format("  step 2 zero-shot filter: {} in Q_ori ({} unparseable, kept)\n", q_ori,
                     step2_unparseable);
  out += fmt::format("  step 3 scenarios: {} gen / {} ret candidates\n", gen_candidates,
                     ret_candidates);
  out += fmt::format("  step 4 filter: {} in Q_gen, {} in Q_ret ({} unparseable)\n", q_gen, q_ret,
                     step4_unparseable);
  for (const auto& [reason, n] : exclusions) out += fmt::format("  excluded {}: {}\n", reason, n);
  for (const auto& [set, s] : lengths) {
    out += fmt::format("  {} question length: mean {:.1f} tokens over {} items\n", set, s.mean, s.count);
  }
  return out;
}

BuildResult build_benchmark(const LanguageModel& model, JudgeClient& judge,
                            const std::vector<QAItem>& corpus, const PromptTemplates& templates,
                            const BuildOptions& opts, const Tokenizer* tok) {
  BuildResult out;
  BuildReport& rep = out.report;
  rep.source_name = opts.source_name;
  rep.model_identity = model.identity();
  rep.judge_identity = judge.identity();
  rep.loaded = static_cast<int>(corpus.size());

  std::vector<QAItem> capped;
  std::map<std::string, int> per_subject;
  for (const auto& item : corpus) {
    if (opts.per_subject_cap > 0 && per_subject[item.subject]++ >= opts.per_subject_cap) continue;
    capped.push_back(item);
  }
  rep.capped = static_cast<int>(capped.size());

  auto record = [&](const std::string& step, StepDecision d) {
    if (!d.keep) ++rep.exclusions[step + ":" + d.reason];
    out.decisions.push_back(std::move(d));
  };

  std::vector<QAItem> verified;
  for (const auto& item : capped) {
    StepDecision d = reference_check(model, item, templates);
    rep.step1_unparseable += d.reason == "unparseable" ? 1 : 0;
    if (d.keep) verified.push_back(item);
    record("step1", std::move(d));
  }
  rep.verified = static_cast<int>(verified.size());

  FilterResult ori = zero_shot_filter(model, verified, templates);
  rep.step2_unparseable = ori.unparseable;
  for (auto& d : ori.decisions) record("step2", std::move(d));
  rep.q_ori = static_cast<int>(ori.kept.size());

  std::vector<QAItem> gen_c, ret_c;
  for (const auto& src : ori.kept) {
    ScenarioCandidates c = generate_scenarios(judge, src, templates);
    if (c.gen) gen_c.push_back(*c.gen);
    if (c.ret) ret_c.push_back(*c.ret);
    for (auto& d : c.skipped) record("step3", std::move(d));
  }
  rep.gen_candidates = static_cast<int>(gen_c.size());
  rep.ret_candidates = static_cast<int>(ret_c.size());

  CandidateFilterResult f = filter_candidates(model, gen_c, ret_c, templates);
  rep.step4_unparseable = f.unparseable;
  for (auto& d : f.decisions) record("step4", std::move(d));

  out.benchmark.model_identity = model.identity();
  out.benchmark.ori = ori.kept;
  for (auto& item : out.benchmark.ori) item.set = "ori";
  out.benchmark.gen = std::move(f.gen);
  out.benchmark.ret = std::move(f.ret);
  rep.q_gen = static_cast<int>(out.benchmark.gen.size());
  rep.q_ret = static_cast<int>(out.benchmark.ret.size());
  out.benchmark.check_provenance();
  if (rep.q_ori > 0) rep.lengths = corpus_stats(out.benchmark, tok);
  return out;
}

bool BuildAudit::holds() const {
  return ori.value_or(0.0) == 0.0 && gen.value_or(0.0) == 0.0 && ret.value_or(1.0) == 1.0;
}

BuildAudit audit_benchmark(const LanguageModel& model, const EditBenchmark& bench,
                           const PromptTemplates& templates) {
  auto acc = [&](const std::vector<QAItem>& items) -> std::optional<double> {
    if (items.empty()) return std::nullopt;
    int correct = 0;
    for (const auto& item : items) {
      const McqAnswer a = ask_mcq(model, item, false, templates);
      correct += a.letter && *a.letter == item.answer_letter ? 1 : 0;
    }
    return static_cast<double>(correct) / items.size();
  };
  return {acc(bench.ori), acc(bench.gen), acc(bench.ret)};
}

void export_review(const std::filesystem::path& path, const EditBenchmark& bench) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write review file " + path.string());
  for (const auto* set : {&bench.gen, &bench.ret}) {
    for (const auto& item : *set) {
      auto j = item_to_json(item);
      j["approved"] = true;
      out << j.dump() << "\n";
    }
  }
}

}  // namespace kebench
