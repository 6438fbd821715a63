// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/seed_lists.hpp"

#include <algorithm>
#include <set>

#include "phrasebias/error.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

namespace {

std::string where(const std::filesystem::path& path, int line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

TopicSeeds load_seed_topics(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kConfig, "seed file " + path.string() + " not found");
  TopicSeeds seeds;
  std::vector<std::set<std::string>> seen;
  for (const auto& line : read_content_lines(path)) {
    const bool indented = std::isspace(static_cast<unsigned char>(line.text.front()));
    if (!indented) {
      auto words = split_whitespace(line.text);
      Topic topic;
      topic.name = words[0];
      for (std::size_t i = 1; i < words.size(); ++i) {
        if (words[i].rfind("fixed:", 0) != 0 || words[i].size() == 6 || topic.fixed_phrases)
          fail(ErrorKind::kConfig, where(path, line.number) + ": field 'topic' expects '<name> [fixed:<file>]'");
        const auto list_path = path.parent_path() / words[i].substr(6);
        if (!std::filesystem::exists(list_path))
          fail(ErrorKind::kConfig, where(path, line.number) + ": field 'fixed' names missing file " +
                                       list_path.string());
        std::vector<std::string> phrases;
        std::set<std::string> unique;
        for (const auto& entry : read_content_lines(list_path)) {
          auto phrase = normalize_whitespace(entry.text);
          if (unique.insert(phrase).second) phrases.push_back(std::move(phrase));
        }
        if (phrases.empty())
          fail(ErrorKind::kConfig, list_path.string() + ": field 'fixed' list is empty");
        topic.fixed_phrases = std::move(phrases);
      }
      for (const auto& t : seeds.topics)
        if (t.name == topic.name)
          fail(ErrorKind::kConfig, where(path, line.number) + ": field 'topic' duplicates '" + topic.name + "'");
      seeds.topics.push_back(std::move(topic));
      seen.emplace_back();
      continue;
    }
    if (seeds.topics.empty())
      fail(ErrorKind::kConfig, where(path, line.number) + ": field 'hyponyms' appears before any topic header");
    auto hyponym = normalize_whitespace(line.text);
    if (!seen.back().insert(hyponym).second)
      fail(ErrorKind::kConfig, where(path, line.number) + ": field 'hyponyms' repeats '" + hyponym +
                                   "' in topic '" + seeds.topics.back().name + "'");
    seeds.topics.back().hyponyms.push_back(std::move(hyponym));
  }
  if (seeds.topics.empty()) fail(ErrorKind::kConfig, path.string() + ": field 'topics' is empty");
  for (const auto& t : seeds.topics)
    if (t.hyponyms.empty())
      fail(ErrorKind::kConfig, path.string() + ": field 'hyponyms' is empty for topic '" + t.name + "'");
  return seeds;
}

AttributeTuples load_attribute_tuples(const std::filesystem::path& path, bool extended) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::kConfig, "attribute file " + path.string() + " not found");
  AttributeTuples base, extension;
  int m = 0;
  for (const auto& line : read_content_lines(path)) {
    std::string_view text = line.text;
    text = text.substr(text.find_first_not_of(" \t"));
    const bool is_extension = text.front() == '+';
    if (is_extension) text.remove_prefix(1);
    std::vector<std::string> tuple;
    std::size_t start = 0;
    while (true) {
      auto comma = text.find(',', start);
      tuple.push_back(normalize_whitespace(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    for (const auto& entry : tuple)
      if (entry.empty()) fail(ErrorKind::kFormat, where(path, line.number) + ": empty attribute entry");
    if (m == 0) m = static_cast<int>(tuple.size());
    if (static_cast<int>(tuple.size()) != m)
      fail(ErrorKind::kFormat, where(path, line.number) + ": tuple has " + std::to_string(tuple.size()) +
                                   " entries, expected " + std::to_string(m));
    if (m < 2) fail(ErrorKind::kFormat, where(path, line.number) + ": tuples need at least 2 entries");
    std::set<std::string> unique(tuple.begin(), tuple.end());
    if (unique.size() != tuple.size())
      fail(ErrorKind::kFormat, where(path, line.number) + ": tuple entries must be distinct");
    (is_extension ? extension : base).tuples.push_back(std::move(tuple));
  }
  if (base.tuples.empty()) fail(ErrorKind::kFormat, path.string() + ": no base attribute tuples");
  base.m = m;
  if (extended)
    base.tuples.insert(base.tuples.end(), extension.tuples.begin(), extension.tuples.end());
  return base;
}

}  // namespace phrasebias
