// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "phrasebias/seed_lists.hpp"
#include "phrasebias/text_util.hpp"
#include "test_support.hpp"

namespace phrasebias {
namespace {

TEST(SeedLists, TopicsWithHyponymsAndFixedList) {
  testing::TempDir dir;
  write_file(dir / "career.txt", "nurse\nsoftware engineer\n");
  write_file(dir / "seeds.txt",
             "# topics\nscience\n  physics\n  chemistry\nart\n  poetry\ncareer fixed:career.txt\n  job\n");
  auto seeds = load_seed_topics(dir / "seeds.txt");
  ASSERT_EQ(seeds.size(), 3u);
  EXPECT_EQ(seeds.topics[0].name, "science");
  EXPECT_EQ(seeds.topics[0].hyponyms, (std::vector<std::string>{"physics", "chemistry"}));
  EXPECT_FALSE(seeds.topics[0].fixed_phrases.has_value());
  ASSERT_TRUE(seeds.topics[2].fixed_phrases.has_value());
  EXPECT_EQ(*seeds.topics[2].fixed_phrases, (std::vector<std::string>{"nurse", "software engineer"}));
}

TEST(SeedLists, TopicErrors) {
  testing::TempDir dir;
  write_file(dir / "a.txt", "  orphan\n");
  EXPECT_ERROR_KIND(load_seed_topics(dir / "a.txt"), ErrorKind::kConfig);
  write_file(dir / "b.txt", "science\n");
  EXPECT_ERROR_KIND(load_seed_topics(dir / "b.txt"), ErrorKind::kConfig);
  write_file(dir / "c.txt", "x fixed:nope.txt\n  y\n");
  EXPECT_ERROR_KIND(load_seed_topics(dir / "c.txt"), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(load_seed_topics(dir / "missing.txt"), ErrorKind::kConfig);
}

TEST(SeedLists, BaseAndExtendedTuples) {
  testing::TempDir dir;
  write_file(dir / "attr.csv", "he, she\nman,woman\n+ boy, girl\n");
  auto base = load_attribute_tuples(dir / "attr.csv", false);
  auto ext = load_attribute_tuples(dir / "attr.csv", true);
  EXPECT_EQ(base.m, 2);
  ASSERT_EQ(base.size(), 2u);
  EXPECT_EQ(base.tuples[0], (std::vector<std::string>{"he", "she"}));
  ASSERT_EQ(ext.size(), 3u);
  EXPECT_EQ(ext.tuples[2], (std::vector<std::string>{"boy", "girl"}));
}

TEST(SeedLists, TupleErrors) {
  testing::TempDir dir;
  write_file(dir / "a.csv", "he,she\nman,woman,person\n");
  EXPECT_ERROR_KIND(load_attribute_tuples(dir / "a.csv", false), ErrorKind::kFormat);
  write_file(dir / "b.csv", "he\n");
  EXPECT_ERROR_KIND(load_attribute_tuples(dir / "b.csv", false), ErrorKind::kFormat);
  write_file(dir / "c.csv", "he,he\n");
  EXPECT_ERROR_KIND(load_attribute_tuples(dir / "c.csv", false), ErrorKind::kFormat);
}

}  // namespace
}  // namespace phrasebias
