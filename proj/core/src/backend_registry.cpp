// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/backend_registry.hpp"

#include <charconv>
#include <filesystem>
#include <map>
#include <mutex>

#include <json.hpp>

#include "phrasebias/bert_backend.hpp"
#include "phrasebias/error.hpp"
#include "phrasebias/text_util.hpp"
#include "phrasebias/toy_backend.hpp"

namespace phrasebias {

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, BackendFactory, std::less<>>& registry() {
  static std::map<std::string, BackendFactory, std::less<>> factories;
  return factories;
}

template <typename T>
T parse_number(std::string_view text, std::string_view identifier) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorKind::kConfig, "malformed model identifier '" + std::string(identifier) + "'");
  return value;
}

std::unique_ptr<MaskedLM> make_toy(std::string_view arg, const BackendOptions& options,
                                   std::string_view identifier) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto colon = arg.find(':', start);
    parts.push_back(arg.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 1 && parts.size() != 3)
    fail(ErrorKind::kConfig, "toy identifier must be toy:<seed> or toy:<seed>:<vocab>:<dim>, got '" +
                                 std::string(identifier) + "'");
  const auto seed = parse_number<std::uint64_t>(parts[0], identifier);
  int vocab = 4096, dim = 16;
  if (parts.size() == 3) {
    vocab = parse_number<int>(parts[1], identifier);
    dim = parse_number<int>(parts[2], identifier);
  }
  auto backend = make_toy_backend(seed, vocab, dim);
  backend->set_trainable(options.trainable);
  return backend;
}

std::unique_ptr<MaskedLM> load_directory(const std::filesystem::path& dir, std::string_view identifier,
                                         const BackendOptions& options) {
  const auto config_path = dir / "config.json";
  if (!std::filesystem::exists(config_path))
    fail(ErrorKind::kDependency, "model directory " + dir.string() + " has no config.json");
  std::string type;
  try {
    type = nlohmann::json::parse(read_file(config_path)).value("model_type", "bert");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, config_path.string() + ": " + e.what());
  }
  if (type == "toy") {
    auto backend = ToyBackend::load(dir);
    backend->set_trainable(options.trainable);
    return backend;
  }
  BertLoadOptions bert;
  bert.trainable = options.trainable;
  bert.pooling = options.pooling;
  bert.identifier = std::string(identifier);
  return BertBackend::load(dir, bert);
}

}  // namespace

void register_backend_factory(const std::string& scheme, BackendFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[scheme] = std::move(factory);
}

std::unique_ptr<MaskedLM> load_backend(std::string_view identifier, const BackendOptions& options) {
  if (identifier.empty()) fail(ErrorKind::kConfig, "empty model identifier");
  if (identifier.substr(0, 4) == "toy:") return make_toy(identifier.substr(4), options, identifier);

  const std::filesystem::path as_path{std::string(identifier)};
  if (std::filesystem::is_directory(as_path)) return load_directory(as_path, identifier, options);

  auto colon = identifier.find(':');
  if (colon != std::string_view::npos && colon > 1) {
    BackendFactory factory;
    {
      std::lock_guard lock(registry_mutex());
      auto it = registry().find(identifier.substr(0, colon));
      if (it != registry().end()) factory = it->second;
    }
    if (factory) return factory(identifier.substr(colon + 1), options);
  }
  fail(ErrorKind::kDependency, "cannot resolve model '" + std::string(identifier) +
                                   "': not a toy spec, registered scheme or checkpoint directory");
}

}  // namespace phrasebias
