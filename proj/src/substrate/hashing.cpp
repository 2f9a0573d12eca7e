// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>

namespace kebench {

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(std::span<const std::uint8_t> bytes) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
  return *this;
}

Sha256& Sha256::update(std::string_view text) {
  return update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                          text.size()));
}

Sha256& Sha256::update(const Matrix& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  update(std::span(reinterpret_cast<const std::uint8_t*>(shape), sizeof(shape)));
  // Column-major storage; the bytes are hashed as laid out in memory.
  return update(std::span(reinterpret_cast<const std::uint8_t*>(m.data()),
                          static_cast<std::size_t>(m.size()) * sizeof(double)));
}

Sha256& Sha256::update(const Vector& v) {
  const std::int64_t n = v.size();
  update(std::span(reinterpret_cast<const std::uint8_t*>(&n), sizeof(n)));
  return update(std::span(reinterpret_cast<const std::uint8_t*>(v.data()),
                          static_cast<std::size_t>(v.size()) * sizeof(double)));
}

std::string Sha256::hex_digest() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
  return out;
}

std::string sha256_hex(std::string_view text) {
  Sha256 h;
  h.update(text);
  return h.hex_digest();
}

}  // namespace kebench
