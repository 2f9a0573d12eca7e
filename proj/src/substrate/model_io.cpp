// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace kebench {
namespace {

static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");

constexpr char kMagic[4] = {'K', 'E', 'F', 'X'};
constexpr std::uint32_t kVersion = 1;

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows, cols;
};

std::vector<TensorRef> tensor_refs(Parameters& p) {
  std::vector<TensorRef> out;
  auto add = [&](std::string name, auto& t) {
    out.push_back({std::move(name), t.data(), t.rows(), t.cols()});
  };
  add("token_embedding", p.token_embedding);
  add("position_embedding", p.position_embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& w = p.layers[l];
    const std::string pre = fmt::format("layers.{}.", l);
    add(pre + "attn_gain", w.attn_gain);
    add(pre + "wq", w.wq);
    add(pre + "wk", w.wk);
    add(pre + "wv", w.wv);
    add(pre + "wo", w.wo);
    add(pre + "mlp_gain", w.mlp_gain);
    add(pre + "w_up", w.w_up);
    add(pre + "w_down", w.w_down);
  }
  add("final_gain", p.final_gain);
  add("head", p.head);
  return out;
}

nlohmann::json adaptor_json(const std::optional<CodebookAdaptor>& a) {
  if (!a) return nullptr;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : a->entries) {
    entries.push_back({{"key", std::vector<double>(e.key.begin(), e.key.end())},
                       {"value", std::vector<double>(e.value.begin(), e.value.end())},
                       {"radius", e.radius},
                       {"target", e.target}});
  }
  return {{"layer", a->layer}, {"entries", entries}};
}

void restore_adaptor(TransformerModel& model, const nlohmann::json& j) {
  if (j.is_null()) return;
  auto& a = model.ensure_adaptor(j.at("layer").get<int>());
  for (const auto& e : j.at("entries")) {
    const auto key = e.at("key").get<std::vector<double>>();
    const auto value = e.at("value").get<std::vector<double>>();
    CodebookEntry entry;
    entry.key = Eigen::Map<const Vector>(key.data(), static_cast<Eigen::Index>(key.size()));
    entry.value = Eigen::Map<const Vector>(value.data(), static_cast<Eigen::Index>(value.size()));
    entry.radius = e.at("radius").get<double>();
    entry.target = e.at("target").get<std::string>();
    a.entries.push_back(std::move(entry));
  }
}

nlohmann::json model_config(const TransformerModel& model) {
  return {{"architecture", model.architecture()},
          {"identity", model.identity()},
          {"tokenizer", {{"merges", model.tokenizer().merges()}}},
          {"adaptor", adaptor_json(model.adaptor())}};
}

Tokenizer tokenizer_from(const nlohmann::json& config) {
  return Tokenizer(config.at("tokenizer").at("merges").get<std::vector<Tokenizer::Merge>>());
}

void read_exact(std::istream& in, void* dst, std::size_t n, const std::string& what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("truncated " + what);
}

// Builds a model from a config and a tensor reader; validates the tensor table.
TransformerModel assemble(const nlohmann::json& config, const nlohmann::json& table,
                          const std::function<void(const nlohmann::json&, double*,
                                                   std::size_t)>& read) {
  const auto arch = config.at("architecture").get<Architecture>();
  arch.validate();
  Parameters params = Parameters::zeros(arch);
  auto refs = tensor_refs(params);
  if (table.size() != refs.size()) {
    throw DataError(fmt::format("tensor table has {} entries, expected {}", table.size(),
                                refs.size()));
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& t = table[i];
    if (t.at("name").get<std::string>() != refs[i].name ||
        t.at("rows").get<Eigen::Index>() != refs[i].rows ||
        t.at("cols").get<Eigen::Index>() != refs[i].cols) {
      throw DataError(fmt::format("tensor {} does not match architecture {}", refs[i].name,
                                  arch.describe()));
    }
    read(t, refs[i].data, static_cast<std::size_t>(refs[i].rows * refs[i].cols));
  }
  TransformerModel model(arch, std::move(params), tokenizer_from(config),
                         config.at("identity").get<std::string>());
  restore_adaptor(model, config.value("adaptor", nlohmann::json()));
  return model;
}

}  // namespace

void save_fixture(const TransformerModel& model, const std::filesystem::path& path) {
  Parameters params = model.parameters();
  auto refs = tensor_refs(params);
  nlohmann::json header = model_config(model);
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& r : refs) {
    table.push_back({{"name", r.name}, {"rows", r.rows}, {"cols", r.cols}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(r.rows * r.cols) * sizeof(double);
  }
  header["tensors"] = table;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write model file " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& r : refs) {
    out.write(reinterpret_cast<const char*>(r.data),
              static_cast<std::streamsize>(r.rows * r.cols * sizeof(double)));
  }
  if (!out) throw ValidationError("failed writing model file " + path.string());
}

TransformerModel load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path.string());
  char magic[4];
  read_exact(in, magic, 4, "model header");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(path.string() + " is not a fixture model file");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  read_exact(in, &version, sizeof(version), "model header");
  if (version != kVersion) throw DataError(fmt::format("unsupported model file version {}", version));
  read_exact(in, &len, sizeof(len), "model header");
  std::string text(len, '\0');
  read_exact(in, text.data(), len, "model header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    const auto base = in.tellg();
    return assemble(header, header.at("tensors"),
                    [&](const nlohmann::json& t, double* dst, std::size_t n) {
                      in.seekg(base + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
                      read_exact(in, dst, n * sizeof(double), "tensor data");
                    });
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model header in " + path.string() + ": " + e.what());
  }
}

void save_checkpoint_dir(const TransformerModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Parameters params = model.parameters();
  auto refs = tensor_refs(params);
  const int n_shards = model.architecture().n_layers + 1;
  auto shard_of = [](const std::string& name) -> int {
    if (name.rfind("layers.", 0) != 0) return 0;
    return std::stoi(name.substr(7)) + 1;
  };
  auto shard_name = [&](int s) { return fmt::format("model-{:05d}-of-{:05d}.bin", s + 1, n_shards); };
  std::vector<std::ofstream> shards;
  std::vector<std::uint64_t> offsets(n_shards, 0);
  for (int s = 0; s < n_shards; ++s) {
    shards.emplace_back(dir / shard_name(s), std::ios::binary | std::ios::trunc);
    if (!shards.back()) throw ValidationError("cannot write shard in " + dir.string());
  }
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : refs) {
    const int s = shard_of(r.name);
    table.push_back({{"name", r.name}, {"rows", r.rows}, {"cols", r.cols},
                     {"shard", shard_name(s)}, {"offset", offsets[s]}});
    const auto bytes = static_cast<std::uint64_t>(r.rows * r.cols) * sizeof(double);
    shards[s].write(reinterpret_cast<const char*>(r.data), static_cast<std::streamsize>(bytes));
    offsets[s] += bytes;
  }
  std::ofstream(dir / "config.json") << model_config(model).dump(2) << "\n";
  std::ofstream(dir / "model.index.json") << nlohmann::json{{"tensors", table}}.dump(2) << "\n";
}

TransformerModel load_checkpoint_dir(const std::filesystem::path& dir) {
  auto read_json = [&](const std::string& name) {
    std::ifstream in(dir / name);
    if (!in) throw ValidationError("checkpoint directory " + dir.string() + " lacks " + name);
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed " + name + ": " + e.what());
    }
  };
  const auto config = read_json("config.json");
  const auto index = read_json("model.index.json");
  std::map<std::string, std::ifstream> open;
  try {
    return assemble(config, index.at("tensors"),
                    [&](const nlohmann::json& t, double* dst, std::size_t n) {
                      const auto shard = t.at("shard").get<std::string>();
                      auto it = open.find(shard);
                      if (it == open.end()) {
                        it = open.emplace(shard, std::ifstream(dir / shard, std::ios::binary)).first;
                        if (!it->second) throw DataError("missing shard " + shard);
                      }
                      it->second.seekg(static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
                      read_exact(it->second, dst, n * sizeof(double), "shard " + shard);
                    });
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint index: " + std::string(e.what()));
  }
}

TransformerModel load_model(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_checkpoint_dir(path);
  return load_fixture(path);
}

}  // namespace kebench
