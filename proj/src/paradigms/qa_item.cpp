// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/paradigms/qa_item.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "kebench/common.hpp"

namespace kebench {

void QAItem::validate() const {
  if (id.empty()) throw ValidationError("item without id");
  if (options.size() < 2) throw ValidationError(fmt::format("item {} has fewer than 2 options", id));
  if (options.size() > 26) throw ValidationError(fmt::format("item {} has too many options", id));
  std::set<std::string> seen;
  for (const auto& o : options) {
    if (o.empty()) throw ValidationError(fmt::format("item {} has an empty option", id));
    if (!seen.insert(o).second) throw ValidationError(fmt::format("item {} repeats option '{}'", id, o));
  }
  if (answer_letter < 'A' || answer_index() >= static_cast<int>(options.size())) {
    throw ValidationError(fmt::format("item {} gold letter {} is not an option", id, answer_letter));
  }
}

nlohmann::json item_to_json(const QAItem& item) {
  nlohmann::json opts = nlohmann::json::object();
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    opts[std::string(1, static_cast<char>('A' + i))] = item.options[i];
  }
  nlohmann::json j{{"id", item.id},
                   {"question", item.question},
                   {"options", opts},
                   {"answer_letter", std::string(1, item.answer_letter)},
                   {"answer_text", item.answer_text},
                   {"reference", nullptr},
                   {"subject", item.subject},
                   {"set", item.set},
                   {"source_id", item.source_id}};
  if (item.reference) j["reference"] = *item.reference;
  return j;
}

QAItem item_from_json(const nlohmann::json& j) {
  QAItem item;
  item.id = j.at("id").get<std::string>();
  item.question = j.at("question").get<std::string>();
  const auto& opts = j.at("options");
  if (opts.is_array()) {
    item.options = opts.get<std::vector<std::string>>();
  } else {
    for (std::size_t i = 0; i < opts.size(); ++i) {
      const std::string letter(1, static_cast<char>('A' + i));
      if (!opts.contains(letter)) throw ValidationError("options must be lettered A, B, C... without gaps");
      item.options.push_back(opts.at(letter).get<std::string>());
    }
  }
  const auto letter = j.at("answer_letter").get<std::string>();
  if (letter.size() != 1) throw ValidationError("answer_letter must be one letter");
  item.answer_letter = letter[0];
  item.answer_text = j.value("answer_text", std::string());
  if (item.answer_text.empty() && item.answer_index() >= 0 &&
      item.answer_index() < static_cast<int>(item.options.size())) {
    item.answer_text = item.options[item.answer_index()];
  }
  if (j.contains("reference") && !j.at("reference").is_null()) {
    item.reference = j.at("reference").get<std::string>();
  }
  item.subject = j.value("subject", std::string());
  item.set = j.value("set", std::string("source"));
  item.source_id = j.value("source_id", std::string());
  item.validate();
  return item;
}

ItemLoadResult load_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open item file " + path.string());
  ItemLoadResult out;
  std::set<std::string> ids;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      QAItem item = item_from_json(nlohmann::json::parse(line));
      if (!ids.insert(item.id).second) throw ValidationError("duplicate id " + item.id);
      out.items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      out.errors.emplace_back(n, e.what());
    } catch (const ValidationError& e) {
      out.errors.emplace_back(n, e.what());
    }
  }
  return out;
}

std::string items_to_jsonl(const std::vector<QAItem>& items) {
  std::string out;
  for (const auto& i : items) out += item_to_json(i).dump() + "\n";
  return out;
}

void save_items(const std::filesystem::path& path, const std::vector<QAItem>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << items_to_jsonl(items);
}

std::string format_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    out += fmt::format("{}: {}\n", static_cast<char>('A' + i), options[i]);
  }
  if (!out.empty()) out.pop_back();
  return out;
}

}  // namespace kebench
