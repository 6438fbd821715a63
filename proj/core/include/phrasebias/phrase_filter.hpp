// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phrasebias/anchor_extract.hpp"
#include "phrasebias/embedding_cache.hpp"
#include "phrasebias/masked_lm.hpp"
#include "phrasebias/seed_lists.hpp"

namespace phrasebias {

inline constexpr std::string_view kTemplateBlank = "__";

// Sentence templates with exactly one "__" blank each.
struct TemplateSet {
  std::vector<std::string> templates;

  static TemplateSet load(const std::filesystem::path& path);
  static TemplateSet from(std::vector<std::string> templates);

  std::string fill(std::size_t index, std::string_view phrase) const;
  std::size_t size() const { return templates.size(); }
  std::string hash() const;
};

// Mean of the CLS embeddings of every filled template.
Vector phrase_embedding(const MaskedLM& backend, std::string_view phrase,
                        const TemplateSet& templates, EmbeddingCache* cache = nullptr);

// Throws kDegeneracy when either vector has zero norm.
double cosine(const Vector& a, const Vector& b);

double similarity(const MaskedLM& backend, std::string_view phrase, std::string_view hyponym,
                  const TemplateSet& templates, EmbeddingCache* cache = nullptr);

struct ScoredPhrase {
  std::string phrase;
  int anchor_count = 1;
  double similarity = 0.0;
};

// Orders by similarity descending, then anchor_count descending, then phrase.
bool ranks_before(const ScoredPhrase& a, const ScoredPhrase& b);

// The topk candidates most similar to `hyponym` (all of them when fewer).
std::vector<ScoredPhrase> filter_topk(std::span<const CandidatePhrase> candidates,
                                      std::string_view hyponym, int topk,
                                      const MaskedLM& backend, const TemplateSet& templates,
                                      EmbeddingCache* cache = nullptr);

struct HyponymSelection {
  int topic_index = 0;
  int hyponym_index = 0;  // -1 for verbatim topic lists
  std::vector<ScoredPhrase> phrases;
};

struct PhraseEntry {
  std::string phrase;
  int topic_index = 0;
  int hyponym_index = 0;
  std::string topic;
  std::string hyponym;
  double similarity = 0.0;
  int multiplicity = 1;  // occurrences of the phrase in the weighted set
};

struct PhraseSet {
  std::vector<PhraseEntry> entries;
  bool weighted = false;
  std::map<int, std::vector<std::size_t>> length_buckets;  // token length -> entry indices

  // Recomputes length_buckets with the backend tokenizer.
  void rebucket(const MaskedLM& backend);
  std::size_t distinct_phrases() const;
};

// Weighted set keeps every selection (multiplicity = number of selections);
// unweighted keeps the highest-similarity entry per phrase, in first-seen order.
std::pair<PhraseSet, PhraseSet> assemble_sets(std::span<const HyponymSelection> selections,
                                              const TopicSeeds& topics, const MaskedLM& backend);

// Embeds texts not yet cached; spreads work over `threads` workers.
void precompute_phrase_embeddings(const MaskedLM& backend, std::span<const std::string> texts,
                                  const TemplateSet& templates, EmbeddingCache& cache,
                                  int threads = 1);

// filter_topk for every hyponym of every mined topic plus verbatim topics,
// then assemble_sets.
std::pair<PhraseSet, PhraseSet> mine_phrase_sets(std::span<const CandidatePhrase> candidates,
                                                 const TopicSeeds& topics, int topk,
                                                 const MaskedLM& backend,
                                                 const TemplateSet& templates,
                                                 EmbeddingCache* cache = nullptr, int threads = 1);

void write_phrase_set_jsonl(const std::filesystem::path& path, const PhraseSet& set);
PhraseSet read_phrase_set_jsonl(const std::filesystem::path& path, bool weighted,
                                const MaskedLM& backend);

}  // namespace phrasebias
