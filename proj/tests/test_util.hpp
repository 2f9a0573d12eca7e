// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kebench/substrate/fixture.hpp"
#include "kebench/substrate/model_io.hpp"
#include "kebench/substrate/tokenizer.hpp"
#include "kebench/substrate/transformer.hpp"

namespace kebench::testing {

inline std::filesystem::path data_dir() { return KEBENCH_TEST_DATA_DIR; }

inline std::filesystem::path fixture_path() {
  const char* p = std::getenv("KEBENCH_FIXTURE");
  return p ? std::filesystem::path(p) : std::filesystem::path();
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kebench-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small untrained model over a tokenizer learned from a few fixture lines.
inline TransformerModel tiny_model(std::uint64_t seed = 5, int layers = 2, int d = 16, int m = 32) {
  std::string text;
  for (const auto& l : fixture_corpus_lines(3, 200)) text += l + "\n";
  Architecture a;
  a.n_layers = layers;
  a.d_model = d;
  a.d_mlp = m;
  a.n_heads = 2;
  a.vocab_size = 300;
  a.context_window = 64;
  return TransformerModel::random(a, Tokenizer::train(text, a.vocab_size), seed, "tiny");
}

}  // namespace kebench::testing
