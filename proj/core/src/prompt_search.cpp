// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/prompt_search.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "phrasebias/error.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

void SearchConfig::validate(const MaskedLM& backend) const {
  if (max_length < 1) fail(ErrorKind::kConfig, "search.max_length must be at least 1");
  if (beam_width < 1) fail(ErrorKind::kConfig, "search.beam_width must be at least 1");
  if (batch_size < 1) fail(ErrorKind::kConfig, "search.batch_size must be at least 1");
  if (threads < 1) fail(ErrorKind::kConfig, "search.threads must be at least 1");
  if (search_vocab.empty()) fail(ErrorKind::kConfig, "search vocabulary is empty");
  const auto& info = backend.info();
  for (auto id : search_vocab)
    if (id < 0 || id >= info.vocab_size || info.special.is_special(id))
      fail(ErrorKind::kConfig, "search vocabulary holds invalid or special token " + std::to_string(id));
}

bool prompt_ranks_before(const ScoredPrompt& a, const ScoredPrompt& b) {
  if (a.loss != b.loss) return a.loss > b.loss;
  return a.tokens < b.tokens;
}

SearchVocab build_search_vocab(const std::filesystem::path& frequency_list, int size, const MaskedLM& backend,
                               std::span<const std::string> excluded_words) {
  if (size < 1) fail(ErrorKind::kConfig, "search vocabulary size must be at least 1");
  std::ifstream in(frequency_list);
  if (!in) fail(ErrorKind::kConfig, "frequency list " + frequency_list.string() + " not found");
  std::set<std::string> excluded;
  for (const auto& w : excluded_words) excluded.insert(to_lower_ascii(w));
  const auto& info = backend.info();

  SearchVocab vocab;
  std::set<TokenId> taken;
  std::string line;
  int number = 0;
  long long previous = -1;
  while (static_cast<int>(vocab.ids.size()) < size && std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorKind::kFormat, frequency_list.string() + ":" + std::to_string(number) + ": expected word<TAB>count");
    const std::string word = trim(line.substr(0, tab));
    long long count = 0;
    try {
      count = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, frequency_list.string() + ":" + std::to_string(number) + ": bad count");
    }
    if (previous >= 0 && count > previous)
      fail(ErrorKind::kFormat, frequency_list.string() + ":" + std::to_string(number) + ": counts must descend");
    previous = count;
    if (word.empty() || excluded.count(to_lower_ascii(word))) continue;
    std::vector<TokenId> ids;
    try {
      ids = backend.encode(word);
    } catch (const Error&) {
      continue;
    }
    if (ids.size() != 1 || info.special.is_special(ids[0]) || !taken.insert(ids[0]).second) continue;
    vocab.ids.push_back(ids[0]);
    vocab.words.push_back(word);
  }
  if (static_cast<int>(vocab.ids.size()) < size)
    vocab.warning = "only " + std::to_string(vocab.ids.size()) + " of " + std::to_string(size) +
                    " requested search words are usable single tokens";
  return vocab;
}

namespace {

void score_all(const MaskedLM& backend, const SearchConfig& config, const AttributeTuples& tuples,
               std::span<const PhraseBucket> buckets, std::vector<ScoredPrompt>& candidates) {
  const auto workers = static_cast<std::size_t>(config.threads);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (std::size_t begin = 0; begin < candidates.size(); begin += batch) {
    const auto end = std::min(candidates.size(), begin + batch);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
      try {
        for (std::size_t i = begin + w; i < end; i += workers)
          candidates[i].loss = prompt_loss(backend, PromptCandidate{candidates[i].tokens}, tuples, buckets);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1 || end - begin == 1) {
      work(0);
      if (workers > 1)
        for (std::size_t w = 1; w < workers; ++w) work(w);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t i = begin; i < end; ++i)
      if (!std::isfinite(candidates[i].loss))
        fail(ErrorKind::kSearch, "non-finite loss for prompt '" + backend.detokenize(candidates[i].tokens) + "'");
  }
}

}  // namespace

BiasedPromptSet beam_search(const MaskedLM& backend, const SearchConfig& config, const AttributeTuples& tuples,
                            std::span<const PhraseBucket> buckets, const SearchProgress& progress) {
  config.validate(backend);
  if (tuples.tuples.empty()) fail(ErrorKind::kContract, "attribute tuple list is empty");
  if (buckets.empty()) fail(ErrorKind::kContract, "phrase set has no populated bucket");

  std::vector<ScoredPrompt> beams{ScoredPrompt{}};
  std::vector<ScoredPrompt> all;
  for (int length = 1; length <= config.max_length; ++length) {
    std::vector<ScoredPrompt> candidates;
    std::set<std::vector<TokenId>> seen;
    for (const auto& beam : beams)
      for (auto id : config.search_vocab) {
        auto tokens = beam.tokens;
        tokens.push_back(id);
        if (seen.insert(tokens).second) candidates.push_back({std::move(tokens), 0.0});
      }
    score_all(backend, config, tuples, buckets, candidates);
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(config.beam_width));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      prompt_ranks_before);
    candidates.resize(keep);
    if (progress) progress(length, candidates.front());
    all.insert(all.end(), candidates.begin(), candidates.end());
    beams = std::move(candidates);
  }
  std::sort(all.begin(), all.end(), prompt_ranks_before);
  if (!config.retain_per_length && all.size() > static_cast<std::size_t>(config.beam_width))
    all.resize(static_cast<std::size_t>(config.beam_width));

  BiasedPromptSet out;
  out.prompts = std::move(all);
  out.provenance.model_id = backend.info().identifier;
  out.provenance.max_length = config.max_length;
  out.provenance.beam_width = config.beam_width;
  out.provenance.vocab_size = static_cast<int>(config.search_vocab.size());
  out.provenance.seed = config.seed;
  return out;
}

void write_prompt_set_jsonl(const std::filesystem::path& path, const BiasedPromptSet& set, const MaskedLM& backend) {
  const auto& p = set.provenance;
  std::string out = nlohmann::json{{"provenance",
                                    {{"model_id", p.model_id},
                                     {"config_hash", p.config_hash},
                                     {"phrase_set_hash", p.phrase_set_hash},
                                     {"max_length", p.max_length},
                                     {"beam_width", p.beam_width},
                                     {"vocab_size", p.vocab_size},
                                     {"seed", p.seed}}}}
                        .dump() +
                    "\n";
  for (const auto& prompt : set.prompts)
    out += nlohmann::json{{"tokens", backend.detokenize(prompt.tokens)},
                          {"token_ids", prompt.tokens},
                          {"length", prompt.length()},
                          {"loss", prompt.loss}}
               .dump() +
           "\n";
  write_file(path, out);
}

BiasedPromptSet read_prompt_set_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kDependency, "cannot open prompt set " + path.string());
  BiasedPromptSet set;
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto at = path.string() + ":" + std::to_string(number);
    try {
      auto j = nlohmann::json::parse(line);
      if (!header) {
        const auto& p = j.at("provenance");
        set.provenance = {p.at("model_id").get<std::string>(), p.at("config_hash").get<std::string>(),
                          p.at("phrase_set_hash").get<std::string>(), p.at("max_length").get<int>(),
                          p.at("beam_width").get<int>(), p.at("vocab_size").get<int>(),
                          p.at("seed").get<std::uint64_t>()};
        header = true;
        continue;
      }
      ScoredPrompt prompt{j.at("token_ids").get<std::vector<TokenId>>(), j.at("loss").get<double>()};
      if (!std::isfinite(prompt.loss) || prompt.loss < 0.0) fail(ErrorKind::kFormat, at + ": invalid loss");
      if (j.at("length").get<std::size_t>() != prompt.length()) fail(ErrorKind::kFormat, at + ": length mismatch");
      set.prompts.push_back(std::move(prompt));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, at + ": " + e.what());
    }
  }
  if (!header) fail(ErrorKind::kFormat, path.string() + ": missing provenance header");
  return set;
}

}  // namespace phrasebias
