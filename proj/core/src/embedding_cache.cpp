// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/embedding_cache.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>

#include "phrasebias/error.hpp"
#include "phrasebias/hashing.hpp"
#include "phrasebias/safetensors.hpp"

namespace phrasebias {

EmbeddingCache::EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(file_)) return;
  auto stored = SafetensorsFile::open(file_);
  for (const auto& name : stored.names()) {
    auto values = stored.read_f64(name);
    entries_.emplace(name, Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
}

std::optional<Vector> EmbeddingCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(const std::string& key, const Vector& value) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(key, value);
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void EmbeddingCache::flush() const {
  if (file_.empty()) return;
  std::shared_lock lock(mutex_);
  std::vector<TensorToWrite> tensors;
  tensors.reserve(entries_.size());
  for (const auto& [key, value] : entries_)
    tensors.push_back(make_tensor<double>(key, {static_cast<std::int64_t>(value.size())},
                                          std::span<const double>(value.data(), static_cast<std::size_t>(value.size()))));
  std::sort(tensors.begin(), tensors.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  write_safetensors(file_, tensors);
}

std::string EmbeddingCache::key(std::string_view model_key, std::string_view context, std::string_view text) {
  std::string raw;
  raw.append(model_key).push_back('\x1f');
  raw.append(context).push_back('\x1f');
  raw.append(text);
  return sha256_hex(raw);
}

std::string model_cache_key(const MaskedLM& backend) {
  return backend.info().identifier + "@" + backend.parameter_hash().substr(0, 16);
}

std::optional<std::filesystem::path> cache_dir_from_env() {
  const char* dir = std::getenv("PHRASEBIAS_CACHE_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

}  // namespace phrasebias
