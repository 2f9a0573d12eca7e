// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "kebench/substrate/transformer.hpp"

namespace kebench {

// Single-file fixture format: "KEFX", u32 version, u64 header length, a JSON
// header (architecture, identity, tokenizer merges, adaptor, tensor table),
// then every tensor as little-endian f64 in column-major order.
void save_fixture(const TransformerModel& model, const std::filesystem::path& path);
TransformerModel load_fixture(const std::filesystem::path& path);

// Checkpoint directory: config.json, model.index.json and one shard per layer
// plus a shard for embeddings and head.
void save_checkpoint_dir(const TransformerModel& model, const std::filesystem::path& dir);
TransformerModel load_checkpoint_dir(const std::filesystem::path& dir);

// Directory -> checkpoint directory, otherwise fixture file.
TransformerModel load_model(const std::filesystem::path& path);

}  // namespace kebench
