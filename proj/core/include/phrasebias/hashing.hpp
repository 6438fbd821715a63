// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace phrasebias {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Hash of every regular file below `dir`, keyed by relative path, in sorted order.
std::string sha256_directory(const std::filesystem::path& dir);

}  // namespace phrasebias
