// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kebench {

// Byte-level BPE. Ids 0/1 are BOS/EOS, 2..257 are raw bytes, the rest are
// merges in rank order. Text is normalized before encoding: CRLF becomes LF,
// runs of spaces/tabs collapse to one space, and the ends are trimmed. Decoding
// reproduces the normalized text exactly.
class Tokenizer {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kByteBase = 2;
  static constexpr int kBaseVocab = kByteBase + 256;

  using Merge = std::pair<int, int>;

  Tokenizer() : Tokenizer(std::vector<Merge>{}) {}
  explicit Tokenizer(std::vector<Merge> merges);

  // Learns merges on `corpus` until the vocabulary holds `vocab_size` ids or
  // no pair occurs twice. Ties break toward the smaller pair of ids.
  static Tokenizer train(std::string_view corpus, int vocab_size);

  static std::string normalize(std::string_view text);

  // Throws ValidationError when the normalized text is empty. With
  // `leading_space` the text is encoded as a continuation (" " + text).
  std::vector<int> encode(std::string_view text, bool leading_space = false) const;
  // Special ids are skipped. Byte exact, so a cut can leave partial UTF-8.
  std::string decode(std::span<const int> ids) const;
  std::string token_text(int id) const;

  int vocab_size() const { return kBaseVocab + static_cast<int>(merges_.size()); }
  const std::vector<Merge>& merges() const { return merges_; }

 private:
  std::vector<int> encode_piece(std::string_view piece) const;

  std::vector<Merge> merges_;
  std::vector<std::string> bytes_of_;  // expansion of every id
  std::map<Merge, int> rank_;
};

// Replaces each invalid or truncated UTF-8 sequence with U+FFFD.
std::string repair_utf8(std::string_view bytes);

}  // namespace kebench
