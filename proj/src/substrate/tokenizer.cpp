// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <unordered_map>

#include <cctype>

#include "kebench/common.hpp"

namespace kebench {
namespace {

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80;
}

// Pre-tokens: a newline alone, or an optional leading space followed by a run
// of word bytes or a run of other non-space bytes. Keeping punctuation out of
// words makes " aspirin" encode the same alone and inside " aspirin.".
std::vector<std::string_view> split_pieces(std::string_view text) {
  std::vector<std::string_view> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    if (text[i] == '\n') {
      pieces.push_back(text.substr(i, 1));
      ++i;
      continue;
    }
    if (text[i] == ' ') ++i;
    if (i < text.size() && text[i] != ' ' && text[i] != '\n') {
      const bool word = is_word_byte(text[i]);
      while (i < text.size() && text[i] != ' ' && text[i] != '\n' && is_word_byte(text[i]) == word) {
        ++i;
      }
    }
    pieces.push_back(text.substr(start, i - start));
  }
  return pieces;
}

void apply_merge(std::vector<int>& ids, const Tokenizer::Merge& pair, int merged) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i + 1 < ids.size() && ids[i] == pair.first && ids[i + 1] == pair.second) {
      ids[out++] = merged;
      ++i;
    } else {
      ids[out++] = ids[i];
    }
  }
  ids.resize(out);
}

std::vector<int> byte_ids(std::string_view piece) {
  std::vector<int> ids;
  ids.reserve(piece.size());
  for (unsigned char c : piece) ids.push_back(Tokenizer::kByteBase + c);
  return ids;
}

}  // namespace

Tokenizer::Tokenizer(std::vector<Merge> merges) : merges_(std::move(merges)) {
  bytes_of_.resize(kBaseVocab + merges_.size());
  for (int b = 0; b < 256; ++b) bytes_of_[kByteBase + b] = std::string(1, static_cast<char>(b));
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto [a, b] = merges_[r];
    const int limit = kBaseVocab + static_cast<int>(r);
    if (a < kByteBase || b < kByteBase || a >= limit || b >= limit) {
      throw ValidationError("tokenizer merge " + std::to_string(r) +
                            " references an id that is not yet defined");
    }
    bytes_of_[limit] = bytes_of_[a] + bytes_of_[b];
    rank_.emplace(merges_[r], static_cast<int>(r));
  }
}

std::string Tokenizer::normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      c = '\n';
    }
    if (c == ' ' || c == '\t' || c == '\v' || c == '\f') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  // Trim leading/trailing newlines and spaces.
  std::size_t b = 0;
  while (b < out.size() && (out[b] == '\n' || out[b] == ' ')) ++b;
  std::size_t e = out.size();
  while (e > b && (out[e - 1] == '\n' || out[e - 1] == ' ')) --e;
  return out.substr(b, e - b);
}

Tokenizer Tokenizer::train(std::string_view corpus, int vocab_size) {
  const std::string text = normalize(corpus);
  std::map<std::string_view, long> counts;
  for (auto piece : split_pieces(text)) ++counts[piece];
  std::vector<std::pair<std::vector<int>, long>> words;
  words.reserve(counts.size());
  for (const auto& [piece, n] : counts) words.emplace_back(byte_ids(piece), n);

  std::vector<Merge> merges;
  while (kBaseVocab + static_cast<int>(merges.size()) < vocab_size) {
    std::map<Merge, long> pairs;
    for (const auto& [ids, n] : words) {
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) pairs[{ids[i], ids[i + 1]}] += n;
    }
    Merge best{-1, -1};
    long best_count = 1;
    for (const auto& [pair, n] : pairs) {
      if (n > best_count) {  // std::map order gives the smallest pair on ties
        best = pair;
        best_count = n;
      }
    }
    if (best.first < 0) break;
    const int merged = kBaseVocab + static_cast<int>(merges.size());
    merges.push_back(best);
    for (auto& [ids, n] : words) apply_merge(ids, best, merged);
  }
  return Tokenizer(std::move(merges));
}

std::vector<int> Tokenizer::encode_piece(std::string_view piece) const {
  std::vector<int> ids = byte_ids(piece);
  while (ids.size() > 1) {
    int best_rank = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      auto it = rank_.find({ids[i], ids[i + 1]});
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<int>::max()) break;
    apply_merge(ids, merges_[best_rank], kBaseVocab + best_rank);
  }
  return ids;
}

std::vector<int> Tokenizer::encode(std::string_view text, bool leading_space) const {
  std::string norm = normalize(text);
  if (norm.empty()) throw ValidationError("cannot tokenize empty text");
  if (leading_space) norm.insert(norm.begin(), ' ');
  std::vector<int> out;
  for (auto piece : split_pieces(norm)) {
    auto ids = encode_piece(piece);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < kByteBase || id >= static_cast<int>(bytes_of_.size())) continue;
    out += bytes_of_[id];
  }
  return out;
}

std::string Tokenizer::token_text(int id) const {
  if (id == kBos) return "<bos>";
  if (id == kEos) return "<eos>";
  if (id < 0 || id >= static_cast<int>(bytes_of_.size())) return "<unk>";
  return bytes_of_[id];
}

std::string repair_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto b = static_cast<unsigned char>(bytes[i]);
    std::size_t len = 0;
    unsigned char lo = 0x80, hi = 0xBF;  // allowed range of the second byte
    if (b < 0x80) {
      len = 1;
    } else if (b >= 0xC2 && b <= 0xDF) {
      len = 2;
    } else if (b >= 0xE0 && b <= 0xEF) {
      len = 3;
      if (b == 0xE0) lo = 0xA0;
      if (b == 0xED) hi = 0x9F;
    } else if (b >= 0xF0 && b <= 0xF4) {
      len = 4;
      if (b == 0xF0) lo = 0x90;
      if (b == 0xF4) hi = 0x8F;
    }
    std::size_t ok = len == 0 ? 0 : 1;
    while (ok > 0 && ok < len && i + ok < bytes.size()) {
      const auto c = static_cast<unsigned char>(bytes[i + ok]);
      if (c < (ok == 1 ? lo : 0x80) || c > (ok == 1 ? hi : 0xBF)) break;
      ++ok;
    }
    if (len > 0 && ok == len) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      out += "\xEF\xBF\xBD";
      i += std::max<std::size_t>(ok, 1);
    }
  }
  return out;
}

}  // namespace kebench
