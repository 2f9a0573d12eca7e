// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks against the trained fixture model. Prints one
// PASS/FAIL line per criterion and exits non-zero if any fails.
//
// usage: acceptance <fixture model.kefx> <work dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "kebench/bench/pipeline.hpp"
#include "kebench/cli/commands.hpp"
#include "kebench/edit/editor.hpp"
#include "kebench/edit/locate_edit.hpp"
#include "kebench/edit/null_space.hpp"
#include "kebench/eval/lexical_metrics.hpp"
#include "kebench/eval/single_edit.hpp"
#include "kebench/seq/collapse.hpp"
#include "kebench/seq/harness.hpp"
#include "kebench/substrate/fixture.hpp"
#include "kebench/substrate/model_io.hpp"
#include "kebench/substrate/random.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace kebench;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run(const std::string& id, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++g_failures;
  std::printf("%s %-4s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

const fs::path kData = KEBENCH_TEST_DATA_DIR;

EditContext fixture_context() {
  EditContext ctx;
  ctx.covariance = std::make_shared<CovarianceProvider>(fixture_corpus_lines(99, 400));
  ctx.preserved = std::make_shared<PreservedKeyProvider>(read_lines(kData / "fixture" / "preserved_prompts.txt"));
  return ctx;
}

std::string ltrim(std::string s) {
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  return s;
}

GenerationOptions greedy(int n) {
  GenerationOptions g;
  g.max_tokens = n;
  return g;
}

bool answers(const TransformerModel& model, const std::string& prompt, const std::string& target) {
  return ltrim(model.generate(prompt, greedy(8))).starts_with(target);
}

// 1. Lexical metrics against independent oracles.
Outcome metrics_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& [c, r] : oracle::text_pairs(50, 2026)) {
    const auto ct = word_tokens(c), rt = word_tokens(r);
    worst = std::max(worst, std::abs(rouge_l(c, r) - oracle::rouge_l(ct, rt)));
    worst = std::max(worst, std::abs(bleu(c, r) - oracle::bleu(ct, rt)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          fmt::format("metrics: 50 pairs, max |diff| {:.2e} (tol 1e-9), {:.2f}s (limit 10s)", worst, secs)};
}

// 2. Accuracy on the hand-tallied 30-item set.
Outcome accuracy_tally() {
  const auto preds = oracle::thirty_item_set();
  const double acc = score_accuracy(preds, "ori");
  bool empty_raises = false;
  try {
    score_accuracy(std::vector<Prediction>{}, "ori");
  } catch (const UndefinedMetricError&) {
    empty_raises = true;
  }
  return {acc == 19.0 / 30.0 && empty_raises,
          fmt::format("accuracy: {}/30 (hand tally 19/30, exact); empty set raises: {}", acc * 30, empty_raises)};
}

// 3. Null-space preservation and projector algebra.
Outcome alphaedit_preservation(TransformerModel& model) {
  const auto t0 = Clock::now();
  const auto base = model.snapshot();
  const auto prompts = read_lines(kData / "fixture" / "preserved_prompts.txt");
  std::vector<std::string> before;
  for (const auto& p : prompts) before.push_back(model.generate(p, greedy(12)));

  EditContext ctx = fixture_context();
  auto editor = make_editor("alphaedit", nlohmann::json::object(), ctx);
  const auto fact = fixture_facts(1)[0];
  EditRequest req{fact.prompt, fact.target, {{1, 2}}};
  // Preserved keys are taken on the unedited model.
  std::map<int, Matrix> k0;
  for (int l : req.layers.layers) k0[l] = ctx.preserved->get(model, l).k0;
  const auto out = editor->apply(model, std::span<const EditRequest>(&req, 1));
  double worst_ratio = 0.0;
  for (const auto& [l, d] : out.weight_delta->deltas) {
    const double denom = d.norm() * k0[l].norm();
    if (denom > 0) worst_ratio = std::max(worst_ratio, (d * k0[l]).norm() / denom);
  }
  int identical = 0;
  for (std::size_t i = 0; i < prompts.size(); ++i) identical += model.generate(prompts[i], greedy(12)) == before[i];
  model.restore(base);

  // Projector properties on random key sets of every rank 0..256 (m = 256).
  // Keys are U diag(s) V^T with orthonormal U, V and s in [1, 2], so the
  // numerical rank is exactly r.
  Rng rng(4);
  auto random_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform() - 0.5;
    return a;
  };
  int bad = 0;
  for (int r = 0; r <= 256; ++r) {
    Matrix keys = Matrix::Zero(256, r + 3);
    if (r > 0) {
      const Matrix u = Eigen::HouseholderQR<Matrix>(random_matrix(256, r)).householderQ() * Matrix::Identity(256, r);
      const Matrix v = Eigen::HouseholderQR<Matrix>(random_matrix(r + 3, r)).householderQ() * Matrix::Identity(r + 3, r);
      Vector s(r);
      for (int i = 0; i < r; ++i) s(i) = 1.0 + rng.uniform();
      keys = u * s.asDiagonal() * v.transpose();
    }
    const auto p = compute_null_space_projector(keys);
    const double sym = (p.p - p.p.transpose()).norm();
    const double idem = (p.p * p.p - p.p).norm();
    const double kill = keys.norm() > 0 ? (p.p * keys).norm() / keys.norm() : 0.0;
    if (p.rank != r || sym > 1e-9 || idem > 1e-9 || kill > 1e-9) ++bad;
  }
  const double secs = seconds_since(t0);
  return {worst_ratio <= 1e-6 && identical == static_cast<int>(prompts.size()) && bad == 0 && secs < 60.0,
          fmt::format("alphaedit: max ||dW K0||/(||dW|| ||K0||) {:.2e} (tol 1e-6), {}/{} preserved decodes "
                      "identical, projector ranks 0..256 violations {}, {:.1f}s (limit 60s)",
                      worst_ratio, identical, prompts.size(), bad, secs)};
}

// 4. Every method rewrites at least 9 of 10 fixture facts.
Outcome six_methods(TransformerModel& model) {
  const auto t0 = Clock::now();
  const auto base = model.snapshot();
  const auto facts = fixture_facts(10);
  EditContext ctx = fixture_context();
  bool ok = true;
  std::string summary;
  for (const std::string method : {"rome", "memit", "alphaedit", "anyedit", "lora", "grace"}) {
    int hits = 0;
    for (const auto& f : facts) {
      auto editor = make_editor(method, nlohmann::json::object(), ctx);
      EditRequest req{f.prompt, f.target, method == "rome" ? LayerSpec{{1}} : LayerSpec{{1, 2}}};
      editor->apply(model, std::span<const EditRequest>(&req, 1));
      hits += answers(model, f.prompt, f.target);
      model.restore(base);
    }
    ok = ok && hits >= 9;
    summary += fmt::format(" {} {}/10", method, hits);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 300.0, fmt::format("methods (need >=9/10):{}, {:.0f}s (limit 300s)", summary, secs)};
}

// 5. A single-request, single-layer MEMIT update equals ROME's.
Outcome rome_memit_equivalence(TransformerModel& model) {
  const auto base = model.snapshot();
  EditContext ctx = fixture_context();
  const auto f = fixture_facts(3)[2];
  EditRequest req{f.prompt, f.target, {{1}}};
  const auto rome = make_editor("rome", nlohmann::json::object(), ctx)->apply(model, std::span(&req, 1));
  model.restore(base);
  const auto memit = make_editor("memit", nlohmann::json::object(), ctx)->apply(model, std::span(&req, 1));
  model.restore(base);
  const Matrix& a = rome.weight_delta->deltas.at(1);
  const Matrix& b = memit.weight_delta->deltas.at(1);
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return {diff <= 1e-8, fmt::format("rome/memit: max |delta diff| {:.2e} (tol 1e-8), ||delta|| {:.3f}", diff, a.norm())};
}

// 6. GRACE leaves every input outside its radii untouched.
Outcome grace_locality(TransformerModel& model) {
  const auto base = model.snapshot();
  const auto lines = fixture_corpus_lines(31, 400);
  std::vector<std::string> before;
  for (const auto& l : lines) before.push_back(model.generate(l.substr(0, l.rfind(' ')), greedy(8)));

  EditContext ctx = fixture_context();
  const auto f = fixture_facts(1)[0];
  EditRequest req{f.prompt, f.target, {{1, 2}}};
  make_editor("grace", nlohmann::json::object(), ctx)->apply(model, std::span(&req, 1));
  const bool edit_hits = answers(model, f.prompt, f.target);
  const auto& adaptor = *model.adaptor();

  int probes = 0, identical = 0;
  for (std::size_t i = 0; i < lines.size() && probes < 100; ++i) {
    const std::string prompt = lines[i].substr(0, lines[i].rfind(' '));
    const std::string after = model.generate(prompt, greedy(8));
    // Only inputs whose every decoded position misses all radii count as probes.
    auto tokens = model.prompt_tokens(prompt);
    const auto cont = model.tokenizer().encode(after, true);
    if (!after.empty()) tokens.insert(tokens.end(), cont.begin(), cont.end());
    ForwardOptions raw;
    raw.use_adaptor = false;
    raw.last_layer = adaptor.layer;
    const auto cache = model.forward(tokens, raw);
    bool outside = true;
    const auto& h = cache.layers[adaptor.layer].mlp_raw;
    for (Eigen::Index c = 0; c < h.cols() && outside; ++c) outside = !adaptor.lookup(h.col(c));
    if (!outside) continue;
    ++probes;
    identical += after == before[i];
  }
  model.restore(base);
  return {edit_hits && probes == 100 && identical == 100,
          fmt::format("grace: edit prompt gives target: {}; {}/{} out-of-radius probes byte-identical (need 100/100)",
                      edit_hits, identical, probes)};
}

// 7. Sequential composition equals manual composition bit-for-bit.
Outcome sequential_composition(TransformerModel& model) {
  const std::string base_sum = model.checksum();
  const auto base = model.snapshot();
  const auto facts = fixture_facts(5);
  std::vector<QAItem> items;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    QAItem q;
    q.id = fmt::format("fact-{}", i);
    q.question = facts[i].prompt;
    q.options = {facts[i].target, "rest"};
    q.answer_text = facts[i].target;
    items.push_back(q);
  }
  SequentialSchedule s;
  for (const auto& q : items) s.edits.push_back({&q, build_gta(q)});
  s.checkpoints = {1, 5};
  s.layers = {{1, 2}};
  SequentialOptions opts;
  opts.detect_collapse = false;
  EditContext ctx = fixture_context();
  auto editor = make_editor("memit", nlohmann::json::object(), ctx);
  const auto t = run_sequential(model, *editor, s, opts);

  model.restore(base);
  const PromptTemplates templates;
  int equal = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    EditRequest r = make_edit_request(items[i], build_gta(items[i]), s.layers, templates);
    editor->apply(model, std::span(&r, 1));
    equal += i < t.step_hashes.size() && model.checksum() == t.step_hashes[i];
  }
  model.restore(base);
  const bool restored = model.checksum() == base_sum;
  return {equal == 5 && restored && !t.failure,
          fmt::format("sequential: {}/5 step hashes equal manual composition; restore gives base checksum: {}",
                      equal, restored)};
}

RunConfig bench_build_config(const fs::path& out, const nlohmann::json& model) {
  const auto d = kData / "fixture";
  return RunConfig::from_json({{"command", "bench-build"},
                               {"seed", 1},
                               {"model", model},
                               {"corpus", (d / "corpus.jsonl").string()},
                               {"source_name", "fixture"},
                               {"judge", {{"mode", "scripted"}, {"path", (d / "judge_script.json").string()}}},
                               {"output_dir", out.string()}});
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// 8. Scripted benchmark construction.
Outcome scripted_bench_build(const fs::path& work) {
  const auto cfg = bench_build_config(
      work / "scripted-build",
      {{"kind", "scripted"}, {"path", (kData / "fixture" / "scripted_model.json").string()}});
  const auto a = cmd_bench_build(cfg);
  const auto b = cmd_bench_build(cfg);
  const auto report = nlohmann::json::parse(slurp(a.run_dir / "build_report.json"));
  const auto& audit = report.at("audit");
  const bool clean = audit.at("ori") == 0.0 && audit.at("gen") == 0.0 && audit.at("ret") == 1.0;
  const bool monotone = report.at("funnel_monotone").get<bool>();
  bool identical = true;
  for (const char* f : {"ori.jsonl", "gen.jsonl", "ret.jsonl", "benchmark.json"}) {
    identical = identical && slurp(a.run_dir / "benchmark" / f) == slurp(b.run_dir / "benchmark" / f);
  }
  return {clean && monotone && identical,
          fmt::format("bench-build: audit {:.0f}/{:.0f}/{:.0f} (need 0/0/100), funnel monotone: {}, "
                      "rebuild byte-identical: {}",
                      audit.at("ori").get<double>() * 100, audit.at("gen").get<double>() * 100,
                      audit.at("ret").get<double>() * 100, monotone, identical)};
}

// 9. Option permutation: content answers are seed-invariant, fixed letters hit chance.
Outcome permutation_mocks() {
  QAItem q;
  q.id = "perm";
  q.question = "Which vitamin prevents scurvy?";
  q.options = {"Vitamin A", "Vitamin C", "Vitamin D", "Vitamin K"};
  q.answer_letter = 'B';
  q.answer_text = "Vitamin C";
  ScriptedModel content("content", [](std::string_view prompt, const GenerationOptions&) -> std::string {
    const auto mcq = parse_mcq_prompt(prompt);
    for (std::size_t i = 0; mcq && i < mcq->options.size(); ++i) {
      if (mcq->options[i] == "Vitamin C") return fmt::format("Final answer: {}", char('A' + i));
    }
    return "";
  });
  ScriptedModel fixed("fixed", {}, "Final answer: A");
  const PromptTemplates t;
  int content_correct = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) content_correct += infer(content, q, "ori", seed, t).correct();
  int fixed_correct = 0;
  for (int i = 0; i < 500; ++i) {
    fixed_correct += infer(fixed, q, "ori", derive_seed(9, fmt::format("trial-{}", i)), t).correct();
  }
  const double rate = fixed_correct / 500.0;
  const double half = 2.576 * std::sqrt(0.25 * 0.75 / 500.0);
  return {content_correct == 100 && std::abs(rate - 0.25) <= half,
          fmt::format("permutation: content mock {}/100 seeds correct; fixed-letter rate {:.3f} in 0.25 +/- {:.4f}",
                      content_correct, rate, half)};
}

// 10. Collapse detector.
Outcome collapse_rigs(const TransformerModel& model) {
  const auto probes = default_probe_prompts();
  ScriptedModel punct("punct", {}, "!!! ??? ... ;;;");
  ScriptedModel repeat("repeat", {}, "the the the the the the the");
  ScriptedModel fluent("fluent", {}, "the patient recovered after rest");
  const bool p = detect_collapse(punct, probes).collapsed;
  const bool r = detect_collapse(repeat, probes).collapsed;
  const bool e = detect_collapse(fluent, probes, 0.0, 0.6).collapsed;
  const auto base = detect_collapse(model, probes);
  return {p && r && e && !base.collapsed,
          fmt::format("collapse: punctuation {}, repetition {}, exact-match-zero {}; base fixture silent: {} "
                      "(alnum {:.2f}, top share {:.2f})",
                      p, r, e, !base.collapsed, base.alnum_ratio, base.top_token_share)};
}

// 11. Single-edit table schema and published markers.
Outcome table_schema(const fs::path& fixture, const fs::path& work) {
  const auto build = cmd_bench_build(
      bench_build_config(work / "fixture-build", {{"kind", "transformer"}, {"path", fixture.string()}}));
  const auto cfg = RunConfig::from_json({{"command", "edit-eval"},
                                         {"seed", 1},
                                         {"model", fixture.string()},
                                         {"benchmark", (build.run_dir / "benchmark").string()},
                                         {"label", "fixture"},
                                         {"method", "memit"},
                                         {"layers", {1, 2}},
                                         {"paradigms", {"gta", "re"}},
                                         {"output_dir", (work / "fixture-eval").string()}});
  const auto eval = cmd_edit_eval(cfg);
  const auto report = nlohmann::json::parse(slurp(eval.run_dir / "report.json"));
  bool schema = report.at("rows").size() == 2;
  for (const auto& row : report.at("rows")) {
    for (const char* k : {"method", "paradigm", "row", "column", "binding", "cell"}) schema = schema && row.contains(k);
    for (const char* k : {"eff", "gen", "ret", "avg"}) schema = schema && row.at("cell").contains(k);
  }
  const std::string text = slurp(eval.run_dir / "table.txt");
  for (const char* k : {"Eff.", "Gen.", "Ret.", "avg.", "memit (re)"}) schema = schema && text.find(k) != std::string::npos;

  const auto check = check_annotation(kData / "annotations" / "published_single_edit.json");
  const auto& t = check.table;
  const auto row = std::find(t.methods.begin(), t.methods.end(), "AlphaEdit") - t.methods.begin();
  const auto col = std::find(t.columns.begin(), t.columns.end(), "LLaMA-8B/MedExQA_edit") - t.columns.begin();
  const bool anchor = row < static_cast<long>(t.methods.size()) && col < static_cast<long>(t.columns.size()) &&
                      t.cells[row][col].avg && std::abs(*t.cells[row][col].avg - 52.2) < 1e-9 &&
                      t.marks()[row][col] == Mark::kBest;
  return {schema && check.matches() && anchor,
          fmt::format("table: schema ok: {}; published markers match: {} ({} mismatches); "
                      "AlphaEdit LLaMA-8B/MedExQA_edit 52.2 bold: {}",
                      schema, check.matches(), check.mismatches.size(), anchor)};
}

// 12. Only scripted transports were used, within the time budget.
Outcome offline_budget(const fs::path& work, Clock::time_point start) {
  int runs = 0, scripted = 0;
  for (const auto& dir : fs::recursive_directory_iterator(work)) {
    if (dir.path().filename() != "judge.json") continue;
    ++runs;
    const auto j = nlohmann::json::parse(slurp(dir.path()));
    scripted += j.dump().find("scripted") != std::string::npos && j.dump().find("http") == std::string::npos;
  }
  const double secs = seconds_since(start);
  return {runs > 0 && scripted == runs && secs < 900.0,
          fmt::format("offline: {}/{} judge records scripted; total {:.0f}s (limit 900s)", scripted, runs, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <fixture model.kefx> <work dir>\n");
    return 2;
  }
  const auto start = Clock::now();
  const fs::path fixture = argv[1];
  const fs::path work = argv[2];
  fs::remove_all(work);
  fs::create_directories(work);
  TransformerModel model = load_fixture(fixture);

  run("1", metrics_oracle);
  run("2", accuracy_tally);
  run("3", [&] { return alphaedit_preservation(model); });
  run("4", [&] { return six_methods(model); });
  run("5", [&] { return rome_memit_equivalence(model); });
  run("6", [&] { return grace_locality(model); });
  run("7", [&] { return sequential_composition(model); });
  run("8", [&] { return scripted_bench_build(work); });
  run("9", permutation_mocks);
  run("10", [&] { return collapse_rigs(model); });
  run("11", [&] { return table_schema(fixture, work); });
  run("12", [&] { return offline_budget(work, start); });

  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
