// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phrasebias {

enum class ErrorKind {
  kConfig,
  kFormat,
  kParse,
  kLength,
  kContract,
  kDomain,
  kCapability,
  kDegeneracy,
  kBucketing,
  kConsistency,
  kDependency,
  kSearch,
  kTraining,
  kNumerical,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the "<kind> error: " prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace phrasebias
