// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phrasebias/bias_objective.hpp"

namespace phrasebias {

struct SearchConfig {
  int max_length = 5;    // longest prompt body
  int beam_width = 100;  // beams kept per length
  std::vector<TokenId> search_vocab;
  std::uint64_t seed = 0;
  int batch_size = 64;  // candidates per scoring batch
  int threads = 1;
  bool retain_per_length = true;  // false keeps the top beam_width overall

  void validate(const MaskedLM& backend) const;
};

struct ScoredPrompt {
  std::vector<TokenId> tokens;
  double loss = 0.0;

  std::size_t length() const { return tokens.size(); }
  bool operator==(const ScoredPrompt&) const = default;
};

// Loss descending, then token ids lexicographically ascending.
bool prompt_ranks_before(const ScoredPrompt& a, const ScoredPrompt& b);

struct SearchProvenance {
  std::string model_id;
  std::string config_hash;
  std::string phrase_set_hash;
  int max_length = 0;
  int beam_width = 0;
  int vocab_size = 0;
  std::uint64_t seed = 0;
};

struct BiasedPromptSet {
  std::vector<ScoredPrompt> prompts;
  SearchProvenance provenance;
};

struct SearchVocab {
  std::vector<TokenId> ids;
  std::vector<std::string> words;
  std::optional<std::string> warning;  // set when fewer than `size` words qualified
};

// Top `size` words of a "word<TAB>count" list (counts descending) that encode to
// one non-special token, skipping `excluded_words` and repeated ids.
SearchVocab build_search_vocab(const std::filesystem::path& frequency_list, int size,
                               const MaskedLM& backend,
                               std::span<const std::string> excluded_words = {});

using SearchProgress = std::function<void(int length, const ScoredPrompt& best)>;

// Beam search maximising prompt_loss. Throws kSearch on a non-finite loss.
BiasedPromptSet beam_search(const MaskedLM& backend, const SearchConfig& config,
                            const AttributeTuples& tuples, std::span<const PhraseBucket> buckets,
                            const SearchProgress& progress = {});

// Header line {"provenance": {...}} followed by one record per prompt.
void write_prompt_set_jsonl(const std::filesystem::path& path, const BiasedPromptSet& set,
                            const MaskedLM& backend);
BiasedPromptSet read_prompt_set_jsonl(const std::filesystem::path& path);

}  // namespace phrasebias
