// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include <gtest/gtest.h>

#include "phrasebias/anchor_extract.hpp"
#include "phrasebias/text_util.hpp"
#include "test_support.hpp"

namespace phrasebias {
namespace {

std::vector<std::string> surfaces(const std::vector<CandidatePhrase>& c) {
  std::vector<std::string> out;
  for (const auto& x : c) out.push_back(x.surface);
  return out;
}

const std::vector<std::string> kFixtureContent = {
    "graphs",          "objects",          "vertices",     "edges",
    "discrete mathematics", "Leonhard Euler", "Seven Bridges of Königsberg",
    "four-colour problem", "computer science", "social network analysis"};

TEST(AnchorExtract, RepeatsAggregate) {
  auto out = extract_anchor_phrases("[[Graph theory|graph theory]] and [[graph theory]] or [[Dance|dance]]",
                                    MarkupDialect::kWikitext, "p");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].surface, "graph theory");
  EXPECT_EQ(out[0].anchor_count, 2);
  EXPECT_EQ(out[1].surface, "dance");
  EXPECT_EQ(out[1].anchor_count, 1);
  EXPECT_EQ(out[1].source_page, "p");
}

TEST(AnchorExtract, NoAnchorsGivesEmptyList) {
  EXPECT_TRUE(extract_anchor_phrases("plain text only", MarkupDialect::kWikitext, "p").empty());
  EXPECT_TRUE(extract_anchor_phrases("<p>plain</p>", MarkupDialect::kHtml, "p").empty());
}

TEST(AnchorExtract, WikitextFixtureDropsNavigation) {
  // 12 links: 10 content, one section link and one inside a navbox template.
  auto out = extract_anchor_phrases_from_file(testing::fixture_dir() / "pages" / "graph_theory.wiki");
  EXPECT_EQ(surfaces(out), kFixtureContent);
  for (const auto& c : out) EXPECT_EQ(c.source_page, "graph_theory");
}

TEST(AnchorExtract, HtmlFixtureDropsNavigation) {
  // 12 anchors: 10 content, one in <nav> and one citation marker.
  auto out = extract_anchor_phrases_from_file(testing::fixture_dir() / "pages" / "graph_theory.html");
  EXPECT_EQ(surfaces(out), kFixtureContent);
}

TEST(AnchorExtract, WikitextRules) {
  auto out = extract_anchor_phrases(
      "[[File:x.png|thumb|a picture]] [[Category:Maths]] [[de:Graphentheorie]] [[:Category:Maths|maths "
      "category]] [[#Top|top]] [[bridge]]s {{cite|[[hidden]]}} <!-- [[commented]] --> "
      "<nowiki>[[literal]]</nowiki> [[Algebra|''abstract'' algebra]]",
      MarkupDialect::kWikitext, "p");
  EXPECT_EQ(surfaces(out), (std::vector<std::string>{"bridges", "abstract algebra"}));
}

TEST(AnchorExtract, ExcludedSurfacesAreDropped) {
  auto out = extract_anchor_phrases("[[Help:Edit|edit]] [[Citation needed|citation needed]] [[Topology]]",
                                    MarkupDialect::kWikitext, "p");
  EXPECT_EQ(surfaces(out), (std::vector<std::string>{"Topology"}));
}

TEST(AnchorExtract, HtmlEntitiesAndInterlanguage) {
  auto out = extract_anchor_phrases(
      "<a href=\"/wiki/Caf%C3%A9\">caf&eacute; culture</a>"
      "<a href=\"https://de.wikipedia.org/wiki/X\" hreflang=\"de\">Deutsch</a>"
      "<a href=\"/wiki/File:A.png\">image</a><a href=\"#History\">history</a>",
      MarkupDialect::kHtml, "p");
  EXPECT_EQ(surfaces(out), (std::vector<std::string>{"café culture"}));
}

TEST(AnchorExtract, UnterminatedLinkReportsPosition) {
  try {
    extract_anchor_phrases("line one\n  [[broken link", MarkupDialect::kWikitext, "pg");
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("pg:2:3"), std::string::npos) << e.what();
  }
  EXPECT_ERROR_KIND(extract_anchor_phrases("<a href=\"/wiki/X\">open", MarkupDialect::kHtml, "pg"),
                    ErrorKind::kParse);
}

TEST(AnchorExtract, MergeIsOrderIndependent) {
  std::vector<CandidatePhrase> a = {{"x", "b", 2}, {"y", "b", 1}};
  std::vector<CandidatePhrase> b = {{"x", "a", 1}};
  std::vector<std::vector<CandidatePhrase>> ab = {a, b}, ba = {b, a};
  auto m1 = merge_candidates(ab);
  auto m2 = merge_candidates(ba);
  EXPECT_EQ(m1, m2);
  ASSERT_EQ(m1.size(), 2u);
  EXPECT_EQ(m1[0], (CandidatePhrase{"x", "a", 3}));
}

TEST(AnchorExtract, JsonlRoundTrip) {
  testing::TempDir dir;
  std::vector<CandidatePhrase> c = {{"graph theory", "p", 2}, {"naïve set", "q", 1}};
  write_candidates_jsonl(dir / "c.jsonl", c);
  EXPECT_EQ(read_candidates_jsonl(dir / "c.jsonl"), c);
  write_file(dir / "bad.jsonl", "{\"surface\": \"x\"}\n");
  EXPECT_ERROR_KIND(read_candidates_jsonl(dir / "bad.jsonl"), ErrorKind::kFormat);
}

TEST(AnchorExtract, ListsPageFilesSorted) {
  auto files = list_page_files(testing::fixture_dir() / "pages");
  ASSERT_EQ(files.size(), 2u);
  EXPECT_TRUE(std::is_sorted(files.begin(), files.end()));
}

}  // namespace
}  // namespace phrasebias
