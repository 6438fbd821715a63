// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace phrasebias {

// Collapses runs of whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::string to_lower_ascii(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

std::string trim(std::string_view text);

// Reads a whole file; throws Error(kIo) naming the path on failure.
std::string read_file(const std::filesystem::path& path);

// Writes atomically-enough for our purposes: temp file then rename.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Lines with '#' comments cut off and blank lines skipped. Indentation is kept.
// Each result keeps its 1-based line number.
struct NumberedLine {
  int number;
  std::string text;
};
std::vector<NumberedLine> read_content_lines(const std::filesystem::path& path);

}  // namespace phrasebias
