// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/wordpiece.hpp"

#include <array>
#include <fstream>

#include "phrasebias/error.hpp"

namespace phrasebias {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;
constexpr std::array<std::string_view, 5> kSpecialTokens = {"[MASK]", "[CLS]", "[SEP]", "[PAD]",
                                                            "[UNK]"};

// Decodes one code point; invalid bytes decode as U+FFFD and advance by one.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    int c1 = cont(1);
    if (c1 >= 0) {
      i += 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      i += 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      i += 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  ++i;
  return 0xFFFD;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_whitespace(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0x00A0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_control(char32_t c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  return c < 0x20 || (c >= 0x7F && c < 0xA0) || c == 0x200B || c == 0xFEFF;
}

bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126))
    return true;
  return c == 0x00A1 || c == 0x00A7 || c == 0x00AB || c == 0x00B6 || c == 0x00B7 ||
         c == 0x00BB || c == 0x00BF || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F);
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0x2A700 && c <= 0x2B73F) ||
         (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

bool is_combining_mark(char32_t c) {
  return (c >= 0x0300 && c <= 0x036F) || (c >= 0x1AB0 && c <= 0x1AFF) ||
         (c >= 0x1DC0 && c <= 0x1DFF) || (c >= 0x20D0 && c <= 0x20FF) || (c >= 0xFE20 && c <= 0xFE2F);
}

// Accent-stripped base letter for U+00C0..U+017F (NFD minus combining marks),
// '?' where the letter has no single ASCII base.
constexpr std::string_view kLatinFold =
    "aaaaaa?ceeeeiiii?nooooo??uuuuy??aaaaaa?ceeeeiiii?nooooo??uuuuy?y"
    "aaaaaaccccccccdd??eeeeeeeeeegggggggghh??iiiiiiiii???jjkk?llllll????nnnnnn???oooooo??rrrrrrsssssssstttt??uuuuuuuuuuuuwwyyyzzzzzz?";

char32_t fold_accent(char32_t c) {
  if (c >= 0xC0 && c < 0x180) {
    const char base = kLatinFold[c - 0xC0];
    if (base != '?') return static_cast<char32_t>(base);
  }
  return c;
}

char32_t lower_code_point(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if ((c >= 0x100 && c <= 0x137) || (c >= 0x14A && c <= 0x177)) return (c % 2 == 0) ? c + 1 : c;
  if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

bool is_special_literal(std::string_view s) {
  for (auto t : kSpecialTokens)
    if (s == t) return true;
  return false;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  if (vocab_.empty()) fail(ErrorKind::kConfig, "empty WordPiece vocabulary");
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    ids_.emplace(vocab_[i], static_cast<TokenId>(i));
  if (auto it = ids_.find("[UNK]"); it != ids_.end()) unk_ = it->second;
}

WordPieceTokenizer WordPieceTokenizer::from_vocab_file(const std::filesystem::path& path,
                                                       bool lowercase) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open vocabulary " + path.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::optional<TokenId> WordPieceTokenizer::find(std::string_view piece) const {
  auto it = ids_.find(std::string(piece));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& WordPieceTokenizer::piece(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size())
    fail(ErrorKind::kDomain, "token id " + std::to_string(id) + " outside vocabulary");
  return vocab_[static_cast<std::size_t>(id)];
}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
  // Clean, isolate CJK characters, then split on whitespace.
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    char32_t c = next_code_point(text, i);
    if (c == 0 || c == 0xFFFD || is_control(c)) continue;
    if (is_whitespace(c)) {
      cleaned.push_back(' ');
    } else if (is_cjk(c)) {
      cleaned.push_back(' ');
      append_utf8(cleaned, c);
      cleaned.push_back(' ');
    } else {
      append_utf8(cleaned, c);
    }
  }

  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j == i) break;
    std::string_view word(cleaned.data() + i, j - i);
    i = j;

    // Special tokens can be glued to neighbouring text ("[MASK].").
    std::size_t start = 0;
    while (start < word.size()) {
      std::size_t special_at = std::string_view::npos;
      std::string_view special;
      for (auto t : kSpecialTokens) {
        auto at = word.find(t, start);
        if (at != std::string_view::npos && (special_at == std::string_view::npos || at < special_at)) {
          special_at = at;
          special = t;
        }
      }
      std::string_view plain = word.substr(start, special_at == std::string_view::npos
                                                      ? std::string_view::npos
                                                      : special_at - start);
      std::string current;
      for (std::size_t k = 0; k < plain.size();) {
        char32_t c = next_code_point(plain, k);
        if (lowercase_) {
          c = fold_accent(lower_code_point(c));
          if (is_combining_mark(c)) continue;
        }
        if (is_punctuation(c)) {
          if (!current.empty()) tokens.push_back(std::move(current));
          current.clear();
          std::string p;
          append_utf8(p, c);
          tokens.push_back(std::move(p));
        } else {
          append_utf8(current, c);
        }
      }
      if (!current.empty()) tokens.push_back(std::move(current));
      if (special_at == std::string_view::npos) break;
      tokens.emplace_back(special);
      start = special_at + special.size();
    }
  }
  return tokens;
}

void WordPieceTokenizer::wordpiece(const std::string& word, std::vector<TokenId>& out) const {
  std::vector<std::size_t> boundaries;
  for (std::size_t i = 0; i < word.size();) {
    boundaries.push_back(i);
    next_code_point(word, i);
  }
  boundaries.push_back(word.size());
  const std::size_t chars = boundaries.size() - 1;
  if (chars > kMaxCharsPerWord) {
    if (unk_ < 0) fail(ErrorKind::kDomain, "word too long and vocabulary has no [UNK]");
    out.push_back(unk_);
    return;
  }
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < chars) {
    std::size_t end = chars;
    std::optional<TokenId> found;
    while (end > start) {
      std::string candidate = word.substr(boundaries[start], boundaries[end] - boundaries[start]);
      if (start > 0) candidate.insert(0, "##");
      if (auto id = find(candidate)) {
        found = id;
        break;
      }
      --end;
    }
    if (!found) {
      if (unk_ < 0) fail(ErrorKind::kDomain, "word '" + word + "' cannot be encoded");
      out.push_back(unk_);
      return;
    }
    pieces.push_back(*found);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<TokenId> WordPieceTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& token : basic_tokenize(text)) {
    if (is_special_literal(token)) {
      if (auto id = find(token)) {
        ids.push_back(*id);
        continue;
      }
    }
    wordpiece(token, ids);
  }
  return ids;
}

std::string WordPieceTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (auto id : ids) {
    const auto& p = piece(id);
    if (p.size() > 2 && p[0] == '#' && p[1] == '#') {
      out.append(p, 2, std::string::npos);
    } else {
      if (!out.empty()) out.push_back(' ');
      out += p;
    }
  }
  return out;
}

}  // namespace phrasebias
