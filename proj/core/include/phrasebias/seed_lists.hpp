// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phrasebias {

struct Topic {
  std::string name;
  std::vector<std::string> hyponyms;
  // Phrases used verbatim instead of mining, when the topic header names a list.
  std::optional<std::vector<std::string>> fixed_phrases;
};

struct TopicSeeds {
  std::vector<Topic> topics;

  std::size_t size() const { return topics.size(); }
};

// Topic file: unindented header lines name a topic, indented lines below list
// its hyponyms. A header of the form "career fixed:career_phrases.txt" attaches
// a verbatim phrase list resolved relative to the seed file. '#' starts a comment.
TopicSeeds load_seed_topics(const std::filesystem::path& path);

struct AttributeTuples {
  std::vector<std::vector<std::string>> tuples;
  int m = 0;

  std::size_t size() const { return tuples.size(); }
};

// One comma-separated m-tuple per line. Lines prefixed with '+' belong to the
// extended set only: extended=false yields the base set, extended=true the
// base set followed by its extension.
AttributeTuples load_attribute_tuples(const std::filesystem::path& path, bool extended);

}  // namespace phrasebias
