// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "kebench/common.hpp"
#include "kebench/edit/editor.hpp"
#include "kebench/substrate/hashing.hpp"

namespace kebench {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kCommands = {"bench-build", "edit-eval", "seq-run", "layer-sweep"};

nlohmann::json judge_to_json(const JudgeRef& j) {
  return {{"mode", j.mode}, {"path", j.path}, {"config", j.config.to_json()}};
}

JudgeRef judge_from_json(const nlohmann::json& j) {
  JudgeRef r;
  r.mode = j.value("mode", r.mode);
  r.path = j.value("path", r.path);
  if (j.contains("config")) r.config = JudgeConfig::from_json(j.at("config"));
  return r;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json ps = nlohmann::json::array();
  for (auto p : paradigms) ps.push_back(to_string(p));
  nlohmann::json ext = nlohmann::json::array();
  for (const auto& e : externals) {
    ext.push_back({{"kind", e.kind}, {"name", e.name}, {"path", e.path}, {"subjects", e.subjects}});
  }
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : sweep_groups) groups.push_back(g);
  nlohmann::json j{{"command", command},
                   {"model", {{"kind", model.kind}, {"path", model.path}}},
                   {"benchmark", benchmark},
                   {"label", label},
                   {"corpus", corpus},
                   {"source_name", source_name},
                   {"per_subject_cap", per_subject_cap},
                   {"method", method},
                   {"overrides", overrides},
                   {"paradigms", ps},
                   {"inference", to_string(inference)},
                   {"layers", layers},
                   {"schedule", schedule},
                   {"checkpoints", checkpoints},
                   {"edits", edits},
                   {"seed", seed},
                   {"max_items", max_items},
                   {"score_qor", score_qor},
                   {"detect_collapse", detect_collapse},
                   {"externals", ext},
                   {"sweep_groups", groups},
                   {"sample_size", sample_size},
                   {"templates", templates},
                   {"covariance_sample", covariance_sample},
                   {"preserved_prompts", preserved_prompts},
                   {"output_dir", output_dir}};
  j["judge"] = judge ? judge_to_json(*judge) : nlohmann::json(nullptr);
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  static const std::set<std::string> known = {
      "command", "model", "benchmark", "label", "corpus", "source_name", "per_subject_cap",
      "judge", "method", "overrides", "paradigms", "paradigm", "inference", "layers", "schedule",
      "checkpoints", "edits", "seed", "max_items", "score_qor", "detect_collapse", "externals",
      "sweep_groups", "sample_size", "templates", "covariance_sample", "preserved_prompts",
      "output_dir"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown run config key '" + key + "'");
  }
  if (!j.contains("seed") || !j.at("seed").is_number_integer() || j.at("seed").get<std::int64_t>() < 0) {
    throw ValidationError("run config needs an explicit non-negative integer 'seed'");
  }
  RunConfig c;
  try {
    c.command = j.at("command").get<std::string>();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      if (m.is_string()) {
        c.model.path = m.get<std::string>();
      } else {
        c.model.kind = m.value("kind", c.model.kind);
        c.model.path = m.value("path", std::string());
      }
    }
    c.benchmark = j.value("benchmark", c.benchmark);
    c.label = j.value("label", c.label);
    c.corpus = j.value("corpus", c.corpus);
    c.source_name = j.value("source_name", c.source_name);
    c.per_subject_cap = j.value("per_subject_cap", c.per_subject_cap);
    if (j.contains("judge") && !j.at("judge").is_null()) c.judge = judge_from_json(j.at("judge"));
    c.method = j.value("method", c.method);
    if (j.contains("overrides")) c.overrides = j.at("overrides");
    if (j.contains("paradigm")) {
      c.paradigms = {paradigm_from_string(j.at("paradigm").get<std::string>())};
    }
    if (j.contains("paradigms")) {
      c.paradigms.clear();
      for (const auto& p : j.at("paradigms")) c.paradigms.push_back(paradigm_from_string(p.get<std::string>()));
    }
    if (j.contains("inference")) c.inference = inference_mode_from_string(j.at("inference").get<std::string>());
    if (j.contains("layers")) c.layers = j.at("layers").get<LayerSpec>();
    c.schedule = j.value("schedule", c.schedule);
    c.checkpoints = j.value("checkpoints", c.checkpoints);
    c.edits = j.value("edits", c.edits);
    c.seed = j.at("seed").get<std::uint64_t>();
    c.max_items = j.value("max_items", c.max_items);
    c.score_qor = j.value("score_qor", c.score_qor);
    c.detect_collapse = j.value("detect_collapse", c.detect_collapse);
    for (const auto& e : j.value("externals", nlohmann::json::array())) {
      ExternalRef r;
      r.kind = e.at("kind").get<std::string>();
      r.name = e.value("name", std::string());
      r.path = e.at("path").get<std::string>();
      r.subjects = e.value("subjects", std::string());
      c.externals.push_back(std::move(r));
    }
    for (const auto& g : j.value("sweep_groups", nlohmann::json::array())) {
      c.sweep_groups.push_back(g.get<LayerSpec>());
    }
    c.sample_size = j.value("sample_size", c.sample_size);
    c.templates = j.value("templates", c.templates);
    c.covariance_sample = j.value("covariance_sample", c.covariance_sample);
    c.preserved_prompts = j.value("preserved_prompts", c.preserved_prompts);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto need_file = [&](const std::string& what, const std::string& path) {
    if (path.empty()) {
      problems.push_back(what + " is not set");
    } else if (!fs::exists(path)) {
      problems.push_back(fmt::format("{} '{}' does not exist", what, path));
    }
  };
  auto optional_file = [&](const std::string& what, const std::string& path) {
    if (!path.empty() && !fs::exists(path)) problems.push_back(fmt::format("{} '{}' does not exist", what, path));
  };

  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    problems.push_back("unknown command '" + command + "'");
  }
  if (model.kind != "transformer" && model.kind != "scripted") {
    problems.push_back("model.kind must be 'transformer' or 'scripted'");
  }
  need_file("model", model.path);
  if (command != "bench-build" && model.kind != "transformer") {
    problems.push_back(command + " edits weights and needs a transformer model");
  }
  if (judge) {
    if (judge->mode == "scripted" || judge->mode == "replay") {
      need_file("judge file", judge->path);
    } else if (judge->mode == "live") {
      try {
        judge->config.validate();
      } catch (const ValidationError& e) {
        problems.push_back(e.what());
      }
      if (judge->config.endpoint.empty()) problems.push_back("live judge needs an endpoint");
    } else {
      problems.push_back("judge.mode must be scripted, replay or live");
    }
  }
  optional_file("templates", templates);
  optional_file("covariance_sample", covariance_sample);
  optional_file("preserved_prompts", preserved_prompts);
  if (output_dir.empty()) problems.push_back("output_dir is not set");

  if (command == "bench-build") {
    need_file("corpus", corpus);
    if (!judge) problems.push_back("bench-build needs a judge for scenario generation");
    if (per_subject_cap < 0) problems.push_back("per_subject_cap must be >= 0");
  } else {
    need_file("benchmark", benchmark);
    if (!benchmark.empty() && fs::is_directory(benchmark) && !fs::exists(fs::path(benchmark) / "benchmark.json")) {
      problems.push_back("benchmark directory '" + benchmark + "' has no benchmark.json");
    }
    const auto& names = editor_names();
    if (std::find(names.begin(), names.end(), method) == names.end()) {
      problems.push_back("unknown method '" + method + "'");
    }
    if (!overrides.is_object()) problems.push_back("overrides must be an object");
    if (paradigms.empty()) problems.push_back("no paradigm configured");
    for (auto p : paradigms) {
      if (p == Paradigm::kEgr && !judge) problems.push_back("paradigm egr needs a judge");
    }
    if (score_qor && !judge) problems.push_back("score_qor needs a judge");
    if (layers.layers.empty()) problems.push_back("layers is empty");
  }
  if (command == "edit-eval" && schedule != "single") {
    problems.push_back("edit-eval runs the single schedule; use seq-run for sequential");
  }
  if (command == "seq-run") {
    int prev = 0;
    for (int c : checkpoints) {
      if (c <= prev) {
        problems.push_back("checkpoints must be strictly increasing and >= 1");
        break;
      }
      prev = c;
    }
    if (edits < 0) problems.push_back("edits must be >= 0");
    if (checkpoints.empty() && edits == 0) problems.push_back("seq-run needs checkpoints or an edit count");
    for (const auto& e : externals) {
      if (e.kind == "split-mcq") {
        need_file("external", e.path);
        need_file("external subjects", e.subjects);
      } else if (e.kind == "exact-match") {
        need_file("external", e.path);
      } else {
        problems.push_back("unknown external kind '" + e.kind + "'");
      }
    }
  }
  if (command == "layer-sweep") {
    if (sweep_groups.empty()) problems.push_back("layer-sweep needs sweep_groups");
    std::set<int> seen;
    for (const auto& g : sweep_groups) {
      if (g.layers.empty()) problems.push_back("empty sweep group");
      for (int l : g.layers) {
        if (!seen.insert(l).second) problems.push_back(fmt::format("layer {} appears in more than one sweep group", l));
      }
    }
    if (sample_size == 0) problems.push_back("sample_size must be positive");
  }
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ValidationError("override '" + key + "' descends into a non-object");
      *node = nlohmann::json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open run config " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("run config " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  return RunConfig::from_json(j);
}

}  // namespace kebench
