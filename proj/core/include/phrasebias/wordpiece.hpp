// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phrasebias/types.hpp"

namespace phrasebias {

// BERT-style tokenizer: basic pre-tokenization (whitespace, punctuation, CJK,
// optional lowercasing with accent stripping) followed by greedy
// longest-match-first WordPiece. Bracketed special tokens present in the
// vocabulary (e.g. "[MASK]") are matched verbatim and never split.
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase);

  static WordPieceTokenizer from_vocab_file(const std::filesystem::path& path, bool lowercase);

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  // Pre-tokenization only; exposed for tests.
  std::vector<std::string> basic_tokenize(std::string_view text) const;

  std::optional<TokenId> find(std::string_view piece) const;
  const std::string& piece(TokenId id) const;
  int size() const { return static_cast<int>(vocab_.size()); }
  bool lowercase() const { return lowercase_; }

 private:
  void wordpiece(const std::string& word, std::vector<TokenId>& out) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> ids_;
  bool lowercase_;
  TokenId unk_ = -1;
};

}  // namespace phrasebias
