// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/eval/single_edit.hpp"

#include <chrono>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "kebench/eval/lexical_metrics.hpp"
#include "kebench/substrate/hashing.hpp"

namespace kebench {
namespace {

void add_exclusion(SingleEditResult& r, const std::string& reason) {
  for (auto& [name, count] : r.exclusions) {
    if (name == reason) {
      ++count;
      return;
    }
  }
  r.exclusions.emplace_back(reason, 1);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, const std::string& key) {
  if (seed == 0) return 0;
  const std::string hex = sha256_hex(fmt::format("{}:{}", seed, key));
  std::uint64_t v = std::stoull(hex.substr(0, 15), nullptr, 16);
  return v == 0 ? 1 : v;
}

MetricReport EvaluationSet::report() const {
  MetricReport r;
  r.ori = tally(ori);
  r.gen = tally(gen);
  r.ret = tally(ret);
  return r;
}

EvaluationSet evaluate_sources(const LanguageModel& responder, const EditBenchmark& bench,
                               const std::vector<const QAItem*>& sources, std::uint64_t seed,
                               const PromptTemplates& templates, const InferenceOptions& inference) {
  EvaluationSet out;
  for (const QAItem* src : sources) {
    out.ori.push_back(infer(responder, *src, "ori", derive_seed(seed, src->id), templates, inference));
    for (const QAItem* g : bench.linked(bench.gen, src->id)) {
      out.gen.push_back(infer(responder, *g, "gen", derive_seed(seed, g->id), templates, inference));
    }
    for (const QAItem* r : bench.linked(bench.ret, src->id)) {
      out.ret.push_back(infer(responder, *r, "ret", derive_seed(seed, r->id), templates, inference));
    }
  }
  return out;
}

EvaluationSet evaluate_benchmark(const LanguageModel& responder, const EditBenchmark& bench,
                                 std::uint64_t seed, const PromptTemplates& templates,
                                 const InferenceOptions& inference) {
  EvaluationSet out;
  for (const auto& i : bench.ori) out.ori.push_back(infer(responder, i, "ori", derive_seed(seed, i.id), templates, inference));
  for (const auto& i : bench.gen) out.gen.push_back(infer(responder, i, "gen", derive_seed(seed, i.id), templates, inference));
  for (const auto& i : bench.ret) out.ret.push_back(infer(responder, i, "ret", derive_seed(seed, i.id), templates, inference));
  return out;
}

EditRequest make_edit_request(const QAItem& item, const KnowledgeTarget& target,
                              const LayerSpec& layers, const PromptTemplates& templates) {
  EditRequest r;
  r.prompt = templates.render("edit_prompt", item_prompt_fields(item));
  r.target = target.text;
  r.layers = layers;
  r.paradigm = to_string(target.paradigm);
  return r;
}

nlohmann::json ItemRecord::to_json() const {
  nlohmann::json j{{"item_id", item_id}};
  if (target) j["target"] = target->to_json();
  if (!excluded.empty()) j["excluded"] = excluded;
  if (!outcome.is_null()) j["outcome"] = outcome;
  nlohmann::json preds = nlohmann::json::array();
  for (const auto* set : {&predictions.ori, &predictions.gen, &predictions.ret}) {
    for (const auto& p : *set) preds.push_back(p.to_json());
  }
  j["predictions"] = preds;
  if (qor) {
    nlohmann::json q;
    for (std::size_t i = 0; i < QorScores::kFields.size(); ++i) q[QorScores::kFields[i]] = qor->scores[i];
    q["normalized"] = qor->normalized();
    j["qor"] = q;
  }
  return j;
}

SingleEditResult run_single_edit(TransformerModel& model, Editor& editor,
                                 const EditBenchmark& bench, const SingleEditOptions& opts,
                                 const PromptTemplates& templates, JudgeClient* judge) {
  check_binding(bench, responder_identity(model.identity()));
  std::vector<std::pair<const QAItem*, KnowledgeTarget>> pairs;
  SingleEditResult skipped;
  const std::size_t n =
      opts.max_items == 0 ? bench.ori.size() : std::min(opts.max_items, bench.ori.size());
  std::vector<ItemRecord> excluded;
  for (std::size_t i = 0; i < n; ++i) {
    const QAItem& item = bench.ori[i];
    try {
      pairs.emplace_back(&item, build_target(opts.paradigm, item, &model, judge, templates,
                                             &model.tokenizer()));
    } catch (const ParadigmUnavailable& e) {
      ItemRecord rec;
      rec.item_id = item.id;
      rec.excluded = e.reason() + ": " + e.what();
      excluded.push_back(std::move(rec));
      add_exclusion(skipped, e.reason());
    }
  }
  SingleEditResult result = run_single_edit_targets(model, editor, bench, pairs, opts, templates, judge);
  for (auto& [reason, count] : skipped.exclusions) {
    for (int k = 0; k < count; ++k) add_exclusion(result, reason);
  }
  result.report.excluded += static_cast<int>(excluded.size());
  for (auto& rec : excluded) result.records.push_back(std::move(rec));
  return result;
}

SingleEditResult run_single_edit_targets(
    TransformerModel& model, Editor& editor, const EditBenchmark& bench,
    const std::vector<std::pair<const QAItem*, KnowledgeTarget>>& pairs,
    const SingleEditOptions& opts, const PromptTemplates& templates, JudgeClient* judge) {
  opts.layers.validate(model.architecture());
  OptionLikelihoodModel responder(model, templates.get("edit_prompt"));
  check_binding(bench, responder.identity());

  SingleEditResult result;
  result.base_checksum = model.checksum();
  const Checkpoint base = model.snapshot();
  EvaluationSet all;
  double rouge_sum = 0.0, bleu_sum = 0.0, qor_sum = 0.0;
  int lexical = 0;
  auto& interp = result.report.interpretability;

  for (const auto& [item, target] : pairs) {
    ItemRecord rec;
    rec.item_id = item->id;
    rec.target = target;
    EditRequest request = make_edit_request(*item, target, opts.layers, templates);
    try {
      EditOutcome outcome = editor.apply(model, std::span<const EditRequest>(&request, 1));
      rec.outcome = outcome.to_json();
    } catch (const Error& e) {
      // Validation/editor failures exclude the item; the model is restored.
      model.restore(base);
      rec.excluded = std::string("edit-failed: ") + e.what();
      add_exclusion(result, "edit-failed");
      ++result.report.excluded;
      result.records.push_back(std::move(rec));
      continue;
    }
    rec.predictions = evaluate_sources(responder, bench, {item}, opts.seed, templates, opts.inference);
    for (const auto& p : rec.predictions.ori) {
      if (!p.rationale) continue;
      rouge_sum += rouge_l(*p.rationale, target.text);
      bleu_sum += bleu(*p.rationale, target.text);
      ++lexical;
      if (opts.score_qor && judge) {
        ++interp.qor_requested;
        rec.qor = score_qor(*judge, p, *item, templates);
        if (rec.qor) {
          ++interp.qor_scored;
          qor_sum += rec.qor->normalized();
        }
      }
    }
    model.restore(base);
    for (const auto& p : rec.predictions.ori) all.ori.push_back(p);
    for (const auto& p : rec.predictions.gen) all.gen.push_back(p);
    for (const auto& p : rec.predictions.ret) all.ret.push_back(p);
    result.records.push_back(std::move(rec));
  }
  const int excluded = result.report.excluded;
  result.report = all.report();
  result.report.excluded = excluded;
  result.report.interpretability = interp;
  result.report.interpretability.lexical_scored = lexical;
  if (lexical > 0) {
    result.report.interpretability.rouge_l = rouge_sum / lexical;
    result.report.interpretability.bleu = bleu_sum / lexical;
  }
  if (interp.qor_scored > 0) result.report.interpretability.qor = qor_sum / interp.qor_scored;
  if (model.checksum() != result.base_checksum) {
    throw Error(ErrorCategory::kInternal, "model did not return to its base state after the run");
  }
  return result;
}

const SweepCell& SweepGrid::at(std::size_t group, std::size_t bucket) const {
  return cells.at(group * buckets.size() + bucket);
}

std::string SweepGrid::to_csv() const {
  std::string out = "layers,bucket,n_items,avg\n";
  for (const auto& c : cells) {
    // Layers joined with '-' so the field needs no quoting.
    out += fmt::format("{},{},{},{}\n", fmt::join(groups[c.group].layers, "-"), to_string(c.bucket), c.n_items,
                       c.avg ? fmt::format("{:.6f}", *c.avg) : std::string());
  }
  return out;
}

nlohmann::json SweepGrid::to_json() const {
  nlohmann::json cells_j = nlohmann::json::array();
  for (const auto& c : cells) {
    cells_j.push_back({{"layers", groups[c.group].layers},
                       {"bucket", to_string(c.bucket)},
                       {"n_items", c.n_items},
                       {"avg", c.avg ? nlohmann::json(*c.avg) : nlohmann::json(nullptr)},
                       {"report", c.report.to_json()}});
  }
  return {{"cells", cells_j}};
}

void validate_sweep_groups(const std::vector<LayerSpec>& groups, const Architecture& arch) {
  if (groups.empty()) throw ValidationError("layer sweep needs at least one layer group");
  std::set<int> seen;
  for (const auto& g : groups) {
    g.validate(arch);
    for (int l : g.layers) {
      if (!seen.insert(l).second) {
        throw ValidationError(fmt::format("layer {} appears in more than one sweep group", l));
      }
    }
  }
}

std::vector<std::vector<std::pair<const QAItem*, KnowledgeTarget>>> bucket_targets(
    const TransformerModel& model, const EditBenchmark& bench, const SweepOptions& opts,
    const PromptTemplates& templates, JudgeClient* judge) {
  std::vector<std::vector<std::pair<const QAItem*, KnowledgeTarget>>> out(opts.buckets.size());
  for (Paradigm p : opts.paradigms) {
    for (const auto& item : bench.ori) {
      KnowledgeTarget t;
      try {
        t = build_target(p, item, &model, judge, templates, &model.tokenizer());
      } catch (const ParadigmUnavailable&) {
        continue;
      }
      const LengthBucket b = length_bucket(t.token_length);
      for (std::size_t k = 0; k < opts.buckets.size(); ++k) {
        if (opts.buckets[k] == b && out[k].size() < opts.sample_size) out[k].emplace_back(&item, t);
      }
    }
  }
  return out;
}

SweepGrid layer_sweep(TransformerModel& model, const EditBenchmark& bench, const SweepOptions& opts,
                      const EditContext& context, const PromptTemplates& templates,
                      JudgeClient* judge) {
  validate_sweep_groups(opts.groups, model.architecture());
  check_binding(bench, responder_identity(model.identity()));
  const auto targets = bucket_targets(model, bench, opts, templates, judge);
  SweepGrid grid;
  grid.groups = opts.groups;
  grid.buckets = opts.buckets;
  for (std::size_t g = 0; g < opts.groups.size(); ++g) {
    for (std::size_t b = 0; b < opts.buckets.size(); ++b) {
      SweepCell cell;
      cell.group = g;
      cell.bucket = opts.buckets[b];
      cell.n_items = static_cast<int>(targets[b].size());
      if (!targets[b].empty()) {
        auto editor = make_editor(opts.method, opts.overrides, context);
        SingleEditOptions so;
        so.layers = opts.groups[g];
        so.inference = opts.inference;
        so.seed = opts.seed;
        cell.report = run_single_edit_targets(model, *editor, bench, targets[b], so, templates, judge).report;
        cell.avg = cell.report.avg();
      }
      grid.cells.push_back(std::move(cell));
    }
  }
  return grid;
}

}  // namespace kebench
