// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/eval/benchmark.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "kebench/common.hpp"

namespace kebench {

void EditBenchmark::check_provenance() const {
  std::set<std::string> sources;
  for (const auto& item : ori) sources.insert(item.id);
  for (const auto* set : {&gen, &ret}) {
    for (const auto& item : *set) {
      if (item.source_id.empty()) throw DataError("generated item " + item.id + " has no source link");
      if (!sources.count(item.source_id)) {
        throw DataError("generated item " + item.id + " links to unknown source " + item.source_id);
      }
    }
  }
}

std::vector<const QAItem*> EditBenchmark::linked(const std::vector<QAItem>& set,
                                                 const std::string& source) const {
  std::vector<const QAItem*> out;
  for (const auto& item : set) {
    if (item.source_id == source) out.push_back(&item);
  }
  return out;
}

void EditBenchmark::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_items(dir / "ori.jsonl", ori);
  save_items(dir / "gen.jsonl", gen);
  save_items(dir / "ret.jsonl", ret);
  const nlohmann::json meta{{"model_identity", model_identity},
                            {"counts", {{"ori", ori.size()}, {"gen", gen.size()}, {"ret", ret.size()}}}};
  std::ofstream out(dir / "benchmark.json", std::ios::binary);
  out << meta.dump(2) << "\n";
}

EditBenchmark EditBenchmark::load(const std::filesystem::path& dir) {
  const auto meta_path = dir / "benchmark.json";
  std::ifstream in(meta_path);
  if (!in) throw ValidationError("no benchmark.json in " + dir.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + meta_path.string() + ": " + e.what());
  }
  EditBenchmark b;
  b.model_identity = meta.at("model_identity").get<std::string>();
  auto read = [&](const char* name) {
    auto r = load_items(dir / name);
    if (!r.errors.empty()) {
      throw DataError(std::string(name) + " line " + std::to_string(r.errors.front().first) + ": " +
                      r.errors.front().second);
    }
    return r.items;
  };
  b.ori = read("ori.jsonl");
  b.gen = read("gen.jsonl");
  b.ret = read("ret.jsonl");
  b.check_provenance();
  return b;
}

void check_binding(const EditBenchmark& bench, const std::string& model_identity) {
  if (bench.model_identity != model_identity) {
    throw ValidationError("benchmark was built for " + bench.model_identity +
                          " but the configured model is " + model_identity);
  }
}

}  // namespace kebench
