// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/eval/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "kebench/common.hpp"
#include "kebench/eval/inference.hpp"

namespace kebench {
namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_opt(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

// Display precision used for both rendering and marking.
std::optional<long> tenths(const std::optional<double>& v) {
  if (!v) return std::nullopt;
  return std::lround(*v * 10.0);
}

std::string fmt_cell(const std::optional<double>& v) { return v ? fmt::format("{:.1f}", *v) : "-"; }

}  // namespace

std::optional<double> SetCounts::accuracy() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / total;
}

nlohmann::json SetCounts::to_json() const {
  return {{"total", total},
          {"correct", correct},
          {"unextractable", unextractable},
          {"errors", errors},
          {"accuracy", opt(accuracy())}};
}

SetCounts tally(std::span<const Prediction> predictions) {
  SetCounts c;
  for (const auto& p : predictions) {
    ++c.total;
    c.correct += p.correct() ? 1 : 0;
    c.unextractable += p.unextractable() ? 1 : 0;
    c.errors += p.error.empty() ? 0 : 1;
  }
  return c;
}

nlohmann::json Interpretability::to_json() const {
  return {{"rouge_l", opt(rouge_l)},
          {"bleu", opt(bleu)},
          {"qor", opt(qor)},
          {"lexical_scored", lexical_scored},
          {"qor_requested", qor_requested},
          {"qor_scored", qor_scored}};
}

std::optional<double> MetricReport::avg() const {
  const auto e = efficacy(), g = generalization(), r = retention();
  if (!e || !g || !r) return std::nullopt;
  return (*e + *g + *r) / 3.0;
}

double MetricReport::unextractable_rate() const {
  const int total = ori.total + gen.total + ret.total;
  if (total == 0) return 0.0;
  return static_cast<double>(ori.unextractable + gen.unextractable + ret.unextractable) / total;
}

nlohmann::json MetricReport::to_json() const {
  return {{"efficacy", opt(efficacy())},
          {"generalization", opt(generalization())},
          {"retention", opt(retention())},
          {"avg", opt(avg())},
          {"unextractable_rate", unextractable_rate()},
          {"excluded", excluded},
          {"counts", {{"ori", ori.to_json()}, {"gen", gen.to_json()}, {"ret", ret.to_json()}}},
          {"interpretability", interpretability.to_json()}};
}

std::optional<QorScores> score_qor(JudgeClient& judge, const Prediction& prediction,
                                   const QAItem& item, const PromptTemplates& templates) {
  if (!prediction.rationale || prediction.rationale->empty()) {
    throw ValidationError("QoR needs a two-step prediction with a rationale (item " +
                          prediction.item_id + ")");
  }
  auto fields = item_prompt_fields(item);
  fields["rationale"] = *prediction.rationale;
  try {
    return complete_structured<QorScores>(judge, templates.render("qor", fields), parse_qor);
  } catch (const TransportError&) {
    return std::nullopt;
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

std::string to_string(Mark m) {
  switch (m) {
    case Mark::kBest:
      return "bold";
    case Mark::kSecond:
      return "underline";
    case Mark::kNone:
      break;
  }
  return "";
}

void ResultTable::add(const std::string& method, const std::string& column, const TableCell& cell) {
  auto col = std::find(columns.begin(), columns.end(), column);
  if (col == columns.end()) {
    columns.push_back(column);
    for (auto& row : cells) row.emplace_back();
    col = columns.end() - 1;
  }
  auto row = std::find(methods.begin(), methods.end(), method);
  if (row == methods.end()) {
    methods.push_back(method);
    cells.emplace_back(columns.size());
    row = methods.end() - 1;
  }
  cells[row - methods.begin()][col - columns.begin()] = cell;
}

std::vector<std::vector<Mark>> ResultTable::marks() const {
  std::vector<std::vector<Mark>> out(methods.size(), std::vector<Mark>(columns.size(), Mark::kNone));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::optional<long> best, second;
    for (std::size_t r = 0; r < methods.size(); ++r) {
      const auto v = tenths(cells[r][c].avg);
      if (v && (!best || *v > *best)) best = v;
    }
    for (std::size_t r = 0; r < methods.size(); ++r) {
      const auto v = tenths(cells[r][c].avg);
      if (v && *v < *best && (!second || *v > *second)) second = v;
    }
    for (std::size_t r = 0; r < methods.size(); ++r) {
      const auto v = tenths(cells[r][c].avg);
      if (!v) continue;
      if (*v == *best) out[r][c] = Mark::kBest;
      else if (second && *v == *second) out[r][c] = Mark::kSecond;
    }
  }
  return out;
}

std::string ResultTable::render_text() const {
  const auto m = marks();
  std::string out;
  if (!title.empty()) out += title + "\n";
  if (!watermark.empty()) out += "WARNING: " + watermark + "\n";
  std::size_t width = 12;
  for (const auto& name : methods) width = std::max(width, name.size());
  out += fmt::format("{:<{}} {:<6}", "Method", width, "Metric");
  for (const auto& c : columns) out += fmt::format(" {:>18}", c);
  out += "\n";
  const std::array<const char*, 4> names{"Eff.", "Gen.", "Ret.", "avg."};
  for (std::size_t r = 0; r < methods.size(); ++r) {
    for (int k = 0; k < 4; ++k) {
      out += fmt::format("{:<{}} {:<6}", k == 0 ? methods[r] : "", width, names[k]);
      for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& cell = cells[r][c];
        const std::optional<double> v = k == 0 ? cell.eff : k == 1 ? cell.gen : k == 2 ? cell.ret : cell.avg;
        std::string s = fmt_cell(v);
        if (k == 3 && m[r][c] == Mark::kBest) s = "**" + s + "**";
        if (k == 3 && m[r][c] == Mark::kSecond) s = "__" + s + "__";
        out += fmt::format(" {:>18}", s);
      }
      out += "\n";
    }
  }
  out += "avg.: **best**, __second best__ per column\n";
  return out;
}

std::string ResultTable::render_csv() const {
  const auto m = marks();
  std::string out = "method,column,eff,gen,ret,avg,mark\n";
  for (std::size_t r = 0; r < methods.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = cells[r][c];
      auto f = [](const std::optional<double>& v) { return v ? fmt::format("{:.1f}", *v) : std::string(); };
      out += fmt::format("{},{},{},{},{},{},{}\n", methods[r], columns[c], f(cell.eff), f(cell.gen),
                         f(cell.ret), f(cell.avg), to_string(m[r][c]));
    }
  }
  return out;
}

nlohmann::json ResultTable::to_json() const {
  const auto m = marks();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < methods.size(); ++r) {
    nlohmann::json row{{"method", methods[r]}};
    for (const char* k : {"eff", "gen", "ret", "avg", "marks"}) row[k] = nlohmann::json::array();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      row["eff"].push_back(opt(cells[r][c].eff));
      row["gen"].push_back(opt(cells[r][c].gen));
      row["ret"].push_back(opt(cells[r][c].ret));
      row["avg"].push_back(opt(cells[r][c].avg));
      row["marks"].push_back(to_string(m[r][c]));
    }
    rows.push_back(row);
  }
  nlohmann::json j{{"title", title}, {"columns", columns}, {"rows", rows}};
  if (!watermark.empty()) j["watermark"] = watermark;
  return j;
}

TableCell cell_from_report(const MetricReport& r) {
  auto pct = [](const std::optional<double>& v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return *v * 100.0;
  };
  return {pct(r.efficacy()), pct(r.generalization()), pct(r.retention()), pct(r.avg())};
}

AnnotatedTable load_annotated_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open annotation file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed annotation file " + path.string() + ": " + e.what());
  }
  AnnotatedTable out;
  out.table.title = j.value("title", std::string());
  const auto columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& row : j.at("rows")) {
    const auto method = row.at("method").get<std::string>();
    std::vector<Mark> printed;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      TableCell cell{read_opt(row.at("eff").at(c)), read_opt(row.at("gen").at(c)),
                     read_opt(row.at("ret").at(c)), read_opt(row.at("avg").at(c))};
      out.table.add(method, columns[c], cell);
      const auto mark = row.at("marks").at(c).get<std::string>();
      if (mark == "bold") printed.push_back(Mark::kBest);
      else if (mark == "underline") printed.push_back(Mark::kSecond);
      else if (mark.empty()) printed.push_back(Mark::kNone);
      else throw DataError("unknown mark '" + mark + "' in " + path.string());
    }
    out.printed_marks.push_back(std::move(printed));
  }
  return out;
}

}  // namespace kebench
