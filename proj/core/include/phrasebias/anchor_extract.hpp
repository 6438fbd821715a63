// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phrasebias {

inline constexpr int kMaxPhraseWords = 8;

struct CandidatePhrase {
  std::string surface;
  std::string source_page;
  int anchor_count = 1;

  bool operator==(const CandidatePhrase&) const = default;
};

enum class MarkupDialect { kWikitext, kHtml };

// Anchors that point at navigation or citation targets rather than content.
struct AnchorFilterRules {
  // Link namespaces ("File", "Category", ...) compared case-insensitively.
  std::vector<std::string> excluded_namespaces;
  // Anchor surfaces dropped outright, compared case-insensitively.
  std::vector<std::string> excluded_surfaces;
  bool skip_section_links = true;       // "[[#History]]", href="#..."
  bool skip_interlanguage_links = true; // "[[de:Graphentheorie]]"
  bool skip_inside_references = true;  // <ref>..</ref>, <sup class="reference">
  bool skip_inside_templates = true;    // {{...}} in wikitext, <nav>/navbox in HTML

  static AnchorFilterRules defaults();
};

// One candidate per distinct anchor text in first-appearance order. Throws
// kParse with line:column for unterminated links, templates or anchors.
std::vector<CandidatePhrase> extract_anchor_phrases(std::string_view document,
                                                    MarkupDialect dialect,
                                                    std::string_view source_page,
                                                    const AnchorFilterRules& rules =
                                                        AnchorFilterRules::defaults());

// ".html"/".htm" select HTML; anything else is wikitext. The page name is the file stem.
std::vector<CandidatePhrase> extract_anchor_phrases_from_file(
    const std::filesystem::path& path,
    const AnchorFilterRules& rules = AnchorFilterRules::defaults());

// Order-independent multiset merge: counts add, source_page keeps the
// lexicographically smallest page, output sorted by surface.
std::vector<CandidatePhrase> merge_candidates(std::span<const std::vector<CandidatePhrase>> parts);

// Every *.wiki, *.txt, *.html, *.htm file below `dir` in sorted path order.
std::vector<std::filesystem::path> list_page_files(const std::filesystem::path& dir);

void write_candidates_jsonl(const std::filesystem::path& path,
                            std::span<const CandidatePhrase> candidates);
std::vector<CandidatePhrase> read_candidates_jsonl(const std::filesystem::path& path);

}  // namespace phrasebias
