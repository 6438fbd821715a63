// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/phrase_filter.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <set>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "phrasebias/error.hpp"
#include "phrasebias/hashing.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

TemplateSet TemplateSet::from(std::vector<std::string> templates) {
  if (templates.empty()) fail(ErrorKind::kConfig, "template set is empty");
  for (const auto& t : templates) {
    const auto first = t.find(kTemplateBlank);
    if (first == std::string::npos || t.find(kTemplateBlank, first + kTemplateBlank.size()) != std::string::npos)
      fail(ErrorKind::kFormat, "template '" + t + "' must contain exactly one " + std::string(kTemplateBlank));
  }
  TemplateSet set;
  set.templates = std::move(templates);
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kConfig, "template file " + path.string() + " not found");
  std::vector<std::string> templates;
  for (const auto& line : read_content_lines(path)) templates.push_back(normalize_whitespace(line.text));
  return from(std::move(templates));
}

std::string TemplateSet::fill(std::size_t index, std::string_view phrase) const {
  std::string out = templates.at(index);
  out.replace(out.find(kTemplateBlank), kTemplateBlank.size(), phrase);
  return out;
}

std::string TemplateSet::hash() const {
  std::string joined;
  for (const auto& t : templates) joined += t + "\n";
  return sha256_hex(joined);
}

namespace {

Vector compute_phrase_embedding(const MaskedLM& backend, std::string_view phrase, const TemplateSet& templates) {
  Vector sum = Vector::Zero(backend.info().hidden_dim);
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto sentence = templates.fill(i, phrase);
    TokenSequence seq;
    try {
      seq = backend.tokenize(sentence);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kLength) throw;
      fail(ErrorKind::kLength, "template '" + templates.templates[i] + "' filled with '" + std::string(phrase) +
                                   "': " + e.message());
    }
    sum += backend.cls_embedding(seq);
  }
  return sum / static_cast<double>(templates.size());
}

std::string embedding_key(const MaskedLM& backend, std::string_view phrase, const TemplateSet& templates) {
  return EmbeddingCache::key(model_cache_key(backend), "templates:" + templates.hash(), phrase);
}

}  // namespace

Vector phrase_embedding(const MaskedLM& backend, std::string_view phrase, const TemplateSet& templates,
                        EmbeddingCache* cache) {
  if (trim(phrase).empty()) fail(ErrorKind::kContract, "phrase is empty");
  if (templates.size() == 0) fail(ErrorKind::kContract, "template set is empty");
  if (cache == nullptr) return compute_phrase_embedding(backend, phrase, templates);
  const auto key = embedding_key(backend, phrase, templates);
  if (auto hit = cache->find(key)) return *hit;
  Vector value = compute_phrase_embedding(backend, phrase, templates);
  cache->insert(key, value);
  return value;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) fail(ErrorKind::kDegeneracy, "cosine of a zero-norm embedding");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double similarity(const MaskedLM& backend, std::string_view phrase, std::string_view hyponym,
                  const TemplateSet& templates, EmbeddingCache* cache) {
  return cosine(phrase_embedding(backend, phrase, templates, cache),
                phrase_embedding(backend, hyponym, templates, cache));
}

bool ranks_before(const ScoredPhrase& a, const ScoredPhrase& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  if (a.anchor_count != b.anchor_count) return a.anchor_count > b.anchor_count;
  return a.phrase < b.phrase;
}

std::vector<ScoredPhrase> filter_topk(std::span<const CandidatePhrase> candidates, std::string_view hyponym,
                                      int topk, const MaskedLM& backend, const TemplateSet& templates,
                                      EmbeddingCache* cache) {
  if (topk < 1) fail(ErrorKind::kContract, "topk must be at least 1");
  if (candidates.empty()) return {};
  const Vector target = phrase_embedding(backend, hyponym, templates, cache);
  std::vector<ScoredPhrase> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates)
    scored.push_back({c.surface, c.anchor_count, cosine(phrase_embedding(backend, c.surface, templates, cache), target)});
  const auto keep = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(topk));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

void PhraseSet::rebucket(const MaskedLM& backend) {
  length_buckets.clear();
  std::unordered_map<std::string, int> lengths;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& phrase = entries[i].phrase;
    auto it = lengths.find(phrase);
    if (it == lengths.end()) it = lengths.emplace(phrase, static_cast<int>(backend.encode(phrase).size())).first;
    length_buckets[it->second].push_back(i);
  }
}

std::size_t PhraseSet::distinct_phrases() const {
  std::set<std::string_view> unique;
  for (const auto& e : entries) unique.insert(e.phrase);
  return unique.size();
}

std::pair<PhraseSet, PhraseSet> assemble_sets(std::span<const HyponymSelection> selections, const TopicSeeds& topics,
                                              const MaskedLM& backend) {
  PhraseSet weighted, unweighted;
  weighted.weighted = true;
  std::unordered_map<std::string, int> counts;
  std::unordered_map<std::string, std::size_t> first_seen;
  for (const auto& sel : selections) {
    if (sel.topic_index < 0 || static_cast<std::size_t>(sel.topic_index) >= topics.size())
      fail(ErrorKind::kContract, "selection names topic " + std::to_string(sel.topic_index));
    const auto& topic = topics.topics[static_cast<std::size_t>(sel.topic_index)];
    std::string hyponym;
    if (sel.hyponym_index >= 0) {
      if (static_cast<std::size_t>(sel.hyponym_index) >= topic.hyponyms.size())
        fail(ErrorKind::kContract, "selection names hyponym " + std::to_string(sel.hyponym_index));
      hyponym = topic.hyponyms[static_cast<std::size_t>(sel.hyponym_index)];
    }
    for (const auto& p : sel.phrases) {
      PhraseEntry entry{p.phrase, sel.topic_index, sel.hyponym_index, topic.name, hyponym, p.similarity, 1};
      ++counts[p.phrase];
      auto [it, inserted] = first_seen.try_emplace(p.phrase, unweighted.entries.size());
      if (inserted) unweighted.entries.push_back(entry);
      else if (p.similarity > unweighted.entries[it->second].similarity) unweighted.entries[it->second] = entry;
      weighted.entries.push_back(std::move(entry));
    }
  }
  for (auto& e : weighted.entries) e.multiplicity = counts[e.phrase];
  weighted.rebucket(backend);
  unweighted.rebucket(backend);
  return {std::move(weighted), std::move(unweighted)};
}

void precompute_phrase_embeddings(const MaskedLM& backend, std::span<const std::string> texts,
                                  const TemplateSet& templates, EmbeddingCache& cache, int threads) {
  const auto model_key = model_cache_key(backend);
  const auto context = "templates:" + templates.hash();
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (!cache.find(EmbeddingCache::key(model_key, context, texts[i]))) todo.push_back(i);
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t k = w; k < todo.size(); k += workers) {
        const auto& text = texts[todo[k]];
        cache.insert(EmbeddingCache::key(model_key, context, text), compute_phrase_embedding(backend, text, templates));
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::pair<PhraseSet, PhraseSet> mine_phrase_sets(std::span<const CandidatePhrase> candidates, const TopicSeeds& topics,
                                                 int topk, const MaskedLM& backend, const TemplateSet& templates,
                                                 EmbeddingCache* cache, int threads) {
  if (topk < 1) fail(ErrorKind::kContract, "topk must be at least 1");
  EmbeddingCache local;
  EmbeddingCache& store = cache != nullptr ? *cache : local;

  std::vector<std::string> texts;
  for (const auto& c : candidates) texts.push_back(c.surface);
  for (const auto& topic : topics.topics) {
    texts.insert(texts.end(), topic.hyponyms.begin(), topic.hyponyms.end());
    if (topic.fixed_phrases) texts.insert(texts.end(), topic.fixed_phrases->begin(), topic.fixed_phrases->end());
  }
  precompute_phrase_embeddings(backend, texts, templates, store, threads);

  std::vector<HyponymSelection> selections;
  for (std::size_t t = 0; t < topics.size(); ++t) {
    const auto& topic = topics.topics[t];
    if (topic.fixed_phrases) {
      // Verbatim list; similarity records the closest hyponym.
      HyponymSelection sel{static_cast<int>(t), -1, {}};
      std::vector<Vector> hyponyms;
      for (const auto& h : topic.hyponyms) hyponyms.push_back(phrase_embedding(backend, h, templates, &store));
      for (const auto& phrase : *topic.fixed_phrases) {
        const Vector e = phrase_embedding(backend, phrase, templates, &store);
        double best = -1.0;
        for (const auto& h : hyponyms) best = std::max(best, cosine(e, h));
        sel.phrases.push_back({phrase, 1, best});
      }
      selections.push_back(std::move(sel));
      continue;
    }
    for (std::size_t h = 0; h < topic.hyponyms.size(); ++h)
      selections.push_back({static_cast<int>(t), static_cast<int>(h),
                            filter_topk(candidates, topic.hyponyms[h], topk, backend, templates, &store)});
  }
  return assemble_sets(selections, topics, backend);
}

void write_phrase_set_jsonl(const std::filesystem::path& path, const PhraseSet& set) {
  std::string out;
  for (const auto& e : set.entries)
    out += nlohmann::json{{"phrase", e.phrase},
                          {"topic", e.topic},
                          {"hyponym", e.hyponym},
                          {"topic_index", e.topic_index},
                          {"hyponym_index", e.hyponym_index},
                          {"similarity", e.similarity},
                          {"multiplicity", e.multiplicity}}
               .dump() +
           "\n";
  write_file(path, out);
}

PhraseSet read_phrase_set_jsonl(const std::filesystem::path& path, bool weighted, const MaskedLM& backend) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kDependency, "cannot open phrase set " + path.string());
  PhraseSet set;
  set.weighted = weighted;
  std::set<std::string> seen;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto at = path.string() + ":" + std::to_string(number);
    try {
      auto j = nlohmann::json::parse(line);
      PhraseEntry e{j.at("phrase").get<std::string>(), j.at("topic_index").get<int>(), j.at("hyponym_index").get<int>(),
                    j.at("topic").get<std::string>(),  j.at("hyponym").get<std::string>(),
                    j.at("similarity").get<double>(),  j.at("multiplicity").get<int>()};
      if (e.similarity < -1.0 || e.similarity > 1.0 || e.multiplicity < 1)
        fail(ErrorKind::kFormat, at + ": similarity or multiplicity out of range");
      if (!weighted && !seen.insert(e.phrase).second)
        fail(ErrorKind::kFormat, at + ": duplicate phrase '" + e.phrase + "' in an unweighted set");
      set.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::kFormat, at + ": " + ex.what());
    }
  }
  set.rebucket(backend);
  return set;
}

}  // namespace phrasebias
