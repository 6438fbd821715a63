// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "phrasebias/masked_lm.hpp"
#include "phrasebias/types.hpp"

namespace phrasebias {

// Sentence/phrase embeddings keyed by (model key, context hash, text).
// Readers share the lock; insertion is single-writer. When constructed with a
// file, existing entries are loaded and flush() rewrites the file.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path file);

  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  std::optional<Vector> find(const std::string& key) const;
  void insert(const std::string& key, const Vector& value);
  std::size_t size() const;
  void flush() const;

  static std::string key(std::string_view model_key, std::string_view context,
                         std::string_view text);

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Vector> entries_;
  std::filesystem::path file_;
};

// Identifier plus a parameter fingerprint, so a fine-tuned model in the same
// process never reads embeddings cached for its initial weights.
std::string model_cache_key(const MaskedLM& backend);

// Directory named by PHRASEBIAS_CACHE_DIR, if set.
std::optional<std::filesystem::path> cache_dir_from_env();

}  // namespace phrasebias
