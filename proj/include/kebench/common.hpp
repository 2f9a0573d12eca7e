// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace kebench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Failure categories map onto CLI exit codes (see cli/commands.hpp).
enum class ErrorCategory {
  kValidation,
  kTransport,
  kEditor,
  kData,
  kMetric,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCategory::kValidation, what) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what)
      : Error(ErrorCategory::kTransport, what) {}
};

class EditorError : public Error {
 public:
  explicit EditorError(const std::string& what)
      : Error(ErrorCategory::kEditor, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

// Raised when a metric is requested over an empty set. Never silently 0.
class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what)
      : Error(ErrorCategory::kMetric, what) {}
};

class ContextOverflowError : public ValidationError {
 public:
  ContextOverflowError(int tokens, int window)
      : ValidationError("prompt of " + std::to_string(tokens) +
                        " tokens exceeds the context window of " +
                        std::to_string(window) + " tokens"),
        tokens_(tokens),
        window_(window) {}

  int tokens() const noexcept { return tokens_; }
  int window() const noexcept { return window_; }

 private:
  int tokens_;
  int window_;
};

}  // namespace kebench
