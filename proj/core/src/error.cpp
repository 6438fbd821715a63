// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/error.hpp"

namespace phrasebias {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kCapability: return "capability error";
    case ErrorKind::kDegeneracy: return "degeneracy error";
    case ErrorKind::kBucketing: return "bucketing error";
    case ErrorKind::kConsistency: return "consistency error";
    case ErrorKind::kDependency: return "dependency error";
    case ErrorKind::kSearch: return "search error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace phrasebias
