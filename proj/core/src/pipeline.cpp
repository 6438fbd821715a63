// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/pipeline.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "phrasebias/anchor_extract.hpp"
#include "phrasebias/backend_registry.hpp"
#include "phrasebias/bias_objective.hpp"
#include "phrasebias/embedding_cache.hpp"
#include "phrasebias/hashing.hpp"
#include "phrasebias/phrase_filter.hpp"
#include "phrasebias/prompt_search.hpp"
#include "phrasebias/seat.hpp"
#include "phrasebias/seed_lists.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& object, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!object.is_object()) fail(ErrorKind::kConfig, "config field '" + where + "' must be an object");
  for (const auto& [key, _] : object.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorKind::kConfig, "unknown config field '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void read(const json& object, const char* key, T& out, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kConfig, "config field '" + (where.empty() ? std::string(key) : where + "." + key) +
                                 "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail(ErrorKind::kConfig, "override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(ErrorKind::kConfig, "override key '" + key + "' is malformed");
    if (!node->is_object()) fail(ErrorKind::kConfig, "override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

const char* pooling_name(ClsPooling p) { return p == ClsPooling::kPooler ? "pooler" : "raw"; }
const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adamw"; }

}  // namespace

RunConfig RunConfig::from_json(std::string_view text, const fs::path& base_dir, std::span<const std::string> overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  reject_unknown(doc, {"model", "seed", "output_dir", "paths", "filter", "search", "train", "extended_attributes", "pooling"},
                 "");
  RunConfig c;
  read(doc, "model", c.model, "");
  read(doc, "seed", c.seed, "");
  std::string out;
  read(doc, "output_dir", out, "");
  c.output_dir = resolve(base_dir, out);
  read(doc, "extended_attributes", c.extended_attributes, "");
  std::string pooling = "raw";
  read(doc, "pooling", pooling, "");
  if (pooling == "raw") c.pooling = ClsPooling::kRaw;
  else if (pooling == "pooler") c.pooling = ClsPooling::kPooler;
  else fail(ErrorKind::kConfig, "config field 'pooling' must be \"raw\" or \"pooler\"");

  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    reject_unknown(p, {"seeds", "attributes", "templates", "frequency_list", "pages", "seat", "neutral_corpus"}, "paths");
    auto path_field = [&](const char* key, fs::path& target) {
      std::string value;
      read(p, key, value, "paths");
      target = resolve(base_dir, value);
    };
    path_field("seeds", c.paths.seeds);
    path_field("attributes", c.paths.attributes);
    path_field("templates", c.paths.templates);
    path_field("frequency_list", c.paths.frequency_list);
    path_field("pages", c.paths.pages);
    path_field("neutral_corpus", c.paths.neutral_corpus);
    if (p.contains("seat")) {
      std::vector<std::string> entries;
      if (p["seat"].is_string()) entries.push_back(p["seat"].get<std::string>());
      else read(p, "seat", entries, "paths");
      for (const auto& e : entries) {
        const auto path = resolve(base_dir, e);
        if (fs::is_directory(path)) {
          std::vector<fs::path> found;
          for (const auto& f : fs::directory_iterator(path))
            if (f.path().extension() == ".json") found.push_back(f.path());
          std::sort(found.begin(), found.end());
          c.paths.seat.insert(c.paths.seat.end(), found.begin(), found.end());
        } else {
          c.paths.seat.push_back(path);
        }
      }
    }
  }
  if (doc.contains("filter")) {
    const auto& f = doc["filter"];
    reject_unknown(f, {"topk_per_hyponym", "threads"}, "filter");
    read(f, "topk_per_hyponym", c.filter.topk_per_hyponym, "filter");
    read(f, "threads", c.filter.threads, "filter");
  }
  if (doc.contains("search")) {
    const auto& s = doc["search"];
    reject_unknown(s, {"max_length", "beam_width", "vocab_size", "batch_size", "threads", "retain_per_length"}, "search");
    read(s, "max_length", c.search.max_length, "search");
    read(s, "beam_width", c.search.beam_width, "search");
    read(s, "vocab_size", c.search.vocab_size, "search");
    read(s, "batch_size", c.search.batch_size, "search");
    read(s, "threads", c.search.threads, "search");
    read(s, "retain_per_length", c.search.retain_per_length, "search");
  }
  if (doc.contains("train")) {
    const auto& t = doc["train"];
    reject_unknown(t, {"learning_rate", "weight_decay", "batch_size", "max_epochs", "patience", "eval_fraction", "optimizer"},
                   "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "weight_decay", c.train.weight_decay, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "max_epochs", c.train.max_epochs, "train");
    read(t, "patience", c.train.patience, "train");
    read(t, "eval_fraction", c.train.eval_fraction, "train");
    std::string optimizer = "adamw";
    read(t, "optimizer", optimizer, "train");
    if (optimizer == "adamw") c.train.optimizer = OptimizerKind::kAdamW;
    else if (optimizer == "sgd") c.train.optimizer = OptimizerKind::kSgd;
    else fail(ErrorKind::kConfig, "config field 'train.optimizer' must be \"adamw\" or \"sgd\"");
  }
  c.train.seed = c.seed;
  if (!c.model.empty() && c.model.rfind("toy:", 0) != 0) {
    const auto as_path = resolve(base_dir, c.model);
    if (fs::is_directory(as_path)) c.model = as_path.string();
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path, std::span<const std::string> overrides) {
  if (!fs::exists(path)) fail(ErrorKind::kConfig, "config file " + path.string() + " not found");
  return from_json(read_file(path), path.parent_path(), overrides);
}

void RunConfig::validate() const {
  if (model.empty()) fail(ErrorKind::kConfig, "config field 'model' is required");
  if (output_dir.empty()) fail(ErrorKind::kConfig, "config field 'output_dir' is required");
  auto require = [](const fs::path& p, const char* field) {
    if (p.empty()) fail(ErrorKind::kConfig, std::string("config field '") + field + "' is required");
    if (!fs::exists(p)) fail(ErrorKind::kConfig, std::string("config field '") + field + "': " + p.string() + " does not exist");
  };
  require(paths.seeds, "paths.seeds");
  require(paths.attributes, "paths.attributes");
  require(paths.templates, "paths.templates");
  require(paths.frequency_list, "paths.frequency_list");
  require(paths.pages, "paths.pages");
  for (const auto& s : paths.seat) require(s, "paths.seat");
  if (!paths.neutral_corpus.empty()) require(paths.neutral_corpus, "paths.neutral_corpus");
  if (filter.topk_per_hyponym < 1) fail(ErrorKind::kConfig, "filter.topk_per_hyponym must be at least 1");
  if (filter.threads < 1) fail(ErrorKind::kConfig, "filter.threads must be at least 1");
  if (search.max_length < 1 || search.beam_width < 1 || search.vocab_size < 1 || search.batch_size < 1 ||
      search.threads < 1)
    fail(ErrorKind::kConfig, "search settings must all be at least 1");
  train.validate();
}

std::string RunConfig::canonical_json() const {
  json seat = json::array();
  for (const auto& s : paths.seat) seat.push_back(s.generic_string());
  json doc = {{"model", model},
              {"seed", seed},
              {"output_dir", output_dir.generic_string()},
              {"paths",
               {{"seeds", paths.seeds.generic_string()},
                {"attributes", paths.attributes.generic_string()},
                {"templates", paths.templates.generic_string()},
                {"frequency_list", paths.frequency_list.generic_string()},
                {"pages", paths.pages.generic_string()},
                {"seat", seat},
                {"neutral_corpus", paths.neutral_corpus.generic_string()}}},
              {"filter", {{"topk_per_hyponym", filter.topk_per_hyponym}, {"threads", filter.threads}}},
              {"search",
               {{"max_length", search.max_length},
                {"beam_width", search.beam_width},
                {"vocab_size", search.vocab_size},
                {"batch_size", search.batch_size},
                {"threads", search.threads},
                {"retain_per_length", search.retain_per_length}}},
              {"train",
               {{"learning_rate", train.learning_rate},
                {"weight_decay", train.weight_decay},
                {"batch_size", train.batch_size},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"eval_fraction", train.eval_fraction},
                {"optimizer", optimizer_name(train.optimizer)}}},
              {"extended_attributes", extended_attributes},
              {"pooling", pooling_name(pooling)}};
  return doc.dump();
}

namespace {

std::string file_or_empty_hash(const fs::path& p) {
  if (p.empty() || !fs::exists(p)) return "";
  return fs::is_directory(p) ? sha256_directory(p) : sha256_file(p);
}

// Seed file plus any verbatim lists it names.
std::string seeds_hash(const fs::path& seeds) {
  std::string joined = file_or_empty_hash(seeds);
  if (!fs::exists(seeds)) return joined;
  for (const auto& line : read_content_lines(seeds))
    for (const auto& word : split_whitespace(line.text))
      if (word.rfind("fixed:", 0) == 0) joined += file_or_empty_hash(seeds.parent_path() / word.substr(6));
  return sha256_hex(joined);
}

}  // namespace

std::string RunConfig::stage_hash(Stage stage) const {
  json parts = {{"model", model}, {"pooling", pooling_name(pooling)}};
  parts["filter"] = {{"seeds", seeds_hash(paths.seeds)},
                     {"templates", file_or_empty_hash(paths.templates)},
                     {"pages", file_or_empty_hash(paths.pages)},
                     {"topk", filter.topk_per_hyponym}};
  if (stage == Stage::kSearch || stage == Stage::kDebias) {
    parts["search"] = {{"attributes", file_or_empty_hash(paths.attributes)},
                       {"frequency_list", file_or_empty_hash(paths.frequency_list)},
                       {"max_length", search.max_length},
                       {"beam_width", search.beam_width},
                       {"vocab_size", search.vocab_size},
                       {"retain_per_length", search.retain_per_length},
                       {"seed", seed}};
  }
  if (stage == Stage::kDebias) {
    parts["train"] = {{"learning_rate", train.learning_rate},
                      {"weight_decay", train.weight_decay},
                      {"batch_size", train.batch_size},
                      {"max_epochs", train.max_epochs},
                      {"patience", train.patience},
                      {"eval_fraction", train.eval_fraction},
                      {"optimizer", optimizer_name(train.optimizer)},
                      {"extended_attributes", extended_attributes},
                      {"seed", seed}};
  }
  if (stage == Stage::kEval) {
    json seat = json::array();
    for (const auto& s : paths.seat) seat.push_back(file_or_empty_hash(s));
    parts = {{"pooling", pooling_name(pooling)}, {"seat", seat}, {"neutral", file_or_empty_hash(paths.neutral_corpus)}};
  }
  return sha256_hex(parts.dump());
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kFormat:
    case ErrorKind::kParse:
    case ErrorKind::kCapability:
      return 2;
    case ErrorKind::kDependency:
    case ErrorKind::kConsistency:
    case ErrorKind::kIo:
      return 3;
    case ErrorKind::kNumerical:
    case ErrorKind::kTraining:
    case ErrorKind::kSearch:
    case ErrorKind::kDegeneracy:
      return 4;
    default:
      return 1;
  }
}

namespace {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kFilter: return "filter";
    case Stage::kSearch: return "search";
    case Stage::kDebias: return "debias";
    case Stage::kEval: return "eval";
  }
  return "?";
}

fs::path artifact(const RunConfig& c, const char* name) { return c.output_dir / name; }

fs::path sidecar(const fs::path& p) { return fs::path(p.string() + artifacts::kProvenanceSuffix); }

void write_provenance(const RunConfig& c, Stage stage, const fs::path& path, const json& upstream) {
  json record = {{"artifact", path.filename().string()},
                 {"stage", stage_name(stage)},
                 {"stage_hash", c.stage_hash(stage)},
                 {"sha256", file_or_empty_hash(path)},
                 {"seed", c.seed},
                 {"upstream", upstream},
                 {"config", json::parse(c.canonical_json())}};
  write_file(sidecar(path), record.dump(2) + "\n");
}

// Confirms an upstream artifact exists and was produced by the current settings.
std::string check_upstream(const RunConfig& c, const fs::path& path, Stage producer, const StageOptions& options) {
  const std::string cmd = std::string("cmd_") + stage_name(producer);
  if (!fs::exists(path)) fail(ErrorKind::kDependency, path.string() + " is missing; run " + cmd + " first");
  const std::string actual = file_or_empty_hash(path);
  if (options.force) return actual;
  if (!fs::exists(sidecar(path)))
    fail(ErrorKind::kDependency, path.string() + " has no provenance record; rerun " + cmd + " or pass --force");
  json record;
  try {
    record = json::parse(read_file(sidecar(path)));
  } catch (const json::exception& e) {
    fail(ErrorKind::kDependency, sidecar(path).string() + ": " + e.what());
  }
  if (record.value("stage_hash", "") != c.stage_hash(producer))
    fail(ErrorKind::kDependency, path.string() + " was produced with different settings; rerun " + cmd +
                                     " or pass --force");
  if (record.value("sha256", "") != actual)
    fail(ErrorKind::kDependency, path.string() + " changed after " + cmd + " wrote it; rerun " + cmd +
                                     " or pass --force");
  return actual;
}

template <typename F>
StageStatus run_stage(Stage stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    const std::string prefix = std::string(stage_name(stage)) + ": ";
    if (e.message().rfind(prefix, 0) == 0) throw;
    throw Error(e.kind(), prefix + e.message());
  }
}

std::unique_ptr<EmbeddingCache> open_cache(const MaskedLM& backend) {
  auto dir = cache_dir_from_env();
  if (!dir) return std::make_unique<EmbeddingCache>();
  const auto name = sha256_hex(model_cache_key(backend)).substr(0, 24) + ".safetensors";
  return std::make_unique<EmbeddingCache>(*dir / name);
}

std::vector<std::string> attribute_words(const AttributeTuples& tuples) {
  std::vector<std::string> words;
  for (const auto& t : tuples.tuples)
    for (const auto& entry : t)
      for (const auto& w : split_whitespace(entry)) words.push_back(w);
  return words;
}

BackendOptions inference_options(const RunConfig& c) {
  BackendOptions o;
  o.trainable = false;
  o.pooling = c.pooling;
  return o;
}

}  // namespace

StageStatus cmd_filter(const RunConfig& config, const StageOptions&) {
  return run_stage(Stage::kFilter, [&] {
    config.validate();
    fs::create_directories(config.output_dir);
    auto backend = load_backend(config.model, inference_options(config));
    const auto pages = list_page_files(config.paths.pages);
    std::vector<std::vector<CandidatePhrase>> parts;
    for (const auto& page : pages) parts.push_back(extract_anchor_phrases_from_file(page));
    const auto candidates = merge_candidates(parts);
    write_candidates_jsonl(artifact(config, artifacts::kCandidates), candidates);
    spdlog::info("filter: {} pages, {} candidate phrases", pages.size(), candidates.size());

    const auto topics = load_seed_topics(config.paths.seeds);
    PhraseSet weighted, unweighted;
    weighted.weighted = true;
    std::string warning;
    if (candidates.empty()) {
      warning = "page corpus produced no candidate phrases; phrase sets are empty";
      spdlog::warn("filter: {}", warning);
    } else {
      const auto templates = TemplateSet::load(config.paths.templates);
      auto cache = open_cache(*backend);
      std::tie(weighted, unweighted) = mine_phrase_sets(candidates, topics, config.filter.topk_per_hyponym, *backend,
                                                        templates, cache.get(), config.filter.threads);
      cache->flush();
    }
    const auto weighted_path = artifact(config, artifacts::kWeighted);
    const auto unweighted_path = artifact(config, artifacts::kUnweighted);
    write_phrase_set_jsonl(weighted_path, weighted);
    write_phrase_set_jsonl(unweighted_path, unweighted);

    json per_topic = json::array();
    for (std::size_t t = 0; t < topics.size(); ++t) {
      auto count = [&](const PhraseSet& s) {
        return std::count_if(s.entries.begin(), s.entries.end(),
                             [&](const PhraseEntry& e) { return e.topic_index == static_cast<int>(t); });
      };
      per_topic.push_back({{"topic", topics.topics[t].name}, {"weighted", count(weighted)}, {"unweighted", count(unweighted)}});
    }
    json buckets = json::object();
    for (const auto& [n, idx] : unweighted.length_buckets) buckets[std::to_string(n)] = idx.size();
    json summary = {{"pages", pages.size()},
                    {"candidates", candidates.size()},
                    {"weighted_entries", weighted.entries.size()},
                    {"weighted_distinct", weighted.distinct_phrases()},
                    {"unweighted_phrases", unweighted.entries.size()},
                    {"unweighted_length_buckets", buckets},
                    {"topics", per_topic}};
    if (!warning.empty()) summary["warning"] = warning;
    const auto summary_path = artifact(config, artifacts::kFilterSummary);
    write_file(summary_path, summary.dump(2) + "\n");
    for (const auto& p : {artifact(config, artifacts::kCandidates), weighted_path, unweighted_path, summary_path})
      write_provenance(config, Stage::kFilter, p, json::object());
    spdlog::info("filter: |S_weighted| = {}, |S_unweighted| = {}", weighted.entries.size(), unweighted.entries.size());
    return unweighted.entries.empty() ? StageStatus::kEmptyOutput : StageStatus::kOk;
  });
}

StageStatus cmd_search(const RunConfig& config, const StageOptions& options) {
  return run_stage(Stage::kSearch, [&] {
    config.validate();
    const auto phrases_path = artifact(config, artifacts::kUnweighted);
    const auto phrase_hash = check_upstream(config, phrases_path, Stage::kFilter, options);
    auto backend = load_backend(config.model, inference_options(config));
    const auto set = read_phrase_set_jsonl(phrases_path, false, *backend);
    if (set.entries.empty()) fail(ErrorKind::kDependency, "phrase set is empty; cmd_filter produced no phrases");
    const auto tuples = load_attribute_tuples(config.paths.attributes, false);
    const auto all_tuples = load_attribute_tuples(config.paths.attributes, true);
    const auto excluded = attribute_words(all_tuples);
    auto vocab = build_search_vocab(config.paths.frequency_list, config.search.vocab_size, *backend, excluded);
    if (vocab.warning) spdlog::warn("search: {}", *vocab.warning);
    if (vocab.ids.empty()) fail(ErrorKind::kConfig, "search vocabulary is empty");

    SearchConfig sc;
    sc.max_length = config.search.max_length;
    sc.beam_width = config.search.beam_width;
    sc.search_vocab = vocab.ids;
    sc.seed = config.seed;
    sc.batch_size = config.search.batch_size;
    sc.threads = config.search.threads;
    sc.retain_per_length = config.search.retain_per_length;
    const auto buckets = make_buckets(set, *backend, false);
    spdlog::info("search: PL={} K={} |V|={} tuples={} buckets={}", sc.max_length, sc.beam_width, vocab.ids.size(),
                 tuples.size(), buckets.size());
    auto result = beam_search(*backend, sc, tuples, buckets, [&](int length, const ScoredPrompt& best) {
      spdlog::info("search: length {} best loss {:.6f} '{}'", length, best.loss, backend->detokenize(best.tokens));
    });
    result.provenance.config_hash = config.stage_hash(Stage::kSearch);
    result.provenance.phrase_set_hash = phrase_hash;
    const auto out = artifact(config, artifacts::kPrompts);
    write_prompt_set_jsonl(out, result, *backend);
    write_provenance(config, Stage::kSearch, out, {{artifacts::kUnweighted, phrase_hash}});
    return result.prompts.empty() ? StageStatus::kEmptyOutput : StageStatus::kOk;
  });
}

StageStatus cmd_debias(const RunConfig& config, const StageOptions& options) {
  return run_stage(Stage::kDebias, [&] {
    config.validate();
    const auto prompts_path = artifact(config, artifacts::kPrompts);
    const auto weighted_path = artifact(config, artifacts::kWeighted);
    const auto prompt_hash = check_upstream(config, prompts_path, Stage::kSearch, options);
    const auto phrase_hash = check_upstream(config, weighted_path, Stage::kFilter, options);
    BackendOptions bo;
    bo.trainable = true;
    bo.pooling = config.pooling;
    auto backend = load_backend(config.model, bo);
    if (!backend->info().trainable)
      fail(ErrorKind::kCapability, backend->info().identifier + " is not trainable");

    const auto prompts = read_prompt_set_jsonl(prompts_path);
    const auto set = read_phrase_set_jsonl(weighted_path, true, *backend);
    const auto tuples = load_attribute_tuples(config.paths.attributes, config.extended_attributes);
    auto data = build_training_items(prompts, tuples, make_buckets(set, *backend, true), *backend);
    spdlog::info("debias: {} items ({} prompts x {} tuples x {} buckets)", data.items.size(), prompts.prompts.size(),
                 tuples.size(), data.buckets.size());

    CheckpointOptions ckpt;
    ckpt.dir = artifact(config, artifacts::kCheckpoints);
    const auto stamp = ckpt.dir / "stage_hash.txt";
    const auto hash = config.stage_hash(Stage::kDebias) + ":" + prompt_hash + ":" + phrase_hash;
    ckpt.resume = fs::exists(stamp) && trim(read_file(stamp)) == hash;
    if (!ckpt.resume) {
      fs::remove_all(ckpt.dir);
      fs::create_directories(ckpt.dir);
      write_file(stamp, hash + "\n");
    } else {
      spdlog::info("debias: resuming from {}", ckpt.dir.string());
    }
    const auto report = finetune(*backend, data, config.train, &ckpt);
    for (const auto& e : report.epochs)
      spdlog::info("debias: epoch {} train {:.6f} held-out {:.6f}", e.epoch, e.train_loss, e.heldout_loss);
    spdlog::info("debias: best held-out {:.6f} (initial {:.6f}) at epoch {}", report.best_heldout_loss,
                 report.initial_heldout_loss, report.best_epoch);

    const auto model_dir = artifact(config, artifacts::kDebiased);
    fs::remove_all(model_dir);
    backend->save(model_dir);
    const auto report_path = artifact(config, artifacts::kTrainReport);
    write_file(report_path, report.to_json());
    const json upstream = {{artifacts::kPrompts, prompt_hash}, {artifacts::kWeighted, phrase_hash}};
    write_provenance(config, Stage::kDebias, model_dir, upstream);
    write_provenance(config, Stage::kDebias, report_path, upstream);
    return StageStatus::kOk;
  });
}

StageStatus cmd_eval(const RunConfig& config, const StageOptions& options) {
  return run_stage(Stage::kEval, [&] {
    if (config.paths.seat.empty()) fail(ErrorKind::kConfig, "config field 'paths.seat' lists no SEAT specs");
    config.validate();
    fs::create_directories(config.output_dir);
    std::vector<SeatSpec> specs;
    for (const auto& p : config.paths.seat) specs.push_back(load_seat_spec(p));

    const bool baseline = !options.checkpoint.has_value();
    const std::string label = baseline ? "baseline" : (options.eval_label.empty() ? "debiased" : options.eval_label);
    const std::string model = baseline ? config.model : options.checkpoint->string();
    if (!baseline && !fs::exists(*options.checkpoint))
      fail(ErrorKind::kDependency, "checkpoint " + model + " is missing; run cmd_debias first");
    auto backend = load_backend(model, inference_options(config));
    auto cache = open_cache(*backend);
    auto report = run_seat_suite(*backend, specs, cache.get());
    cache->flush();
    for (const auto& t : report.tests) {
      if (t.signed_effect_size) spdlog::info("eval[{}]: {} |d| = {:.4f}", label, t.name, t.magnitude());
      else spdlog::warn("eval[{}]: {} failed: {}", label, t.name, t.error);
    }
    spdlog::info("eval[{}]: average {:.4f}", label, report.average);
    const auto report_path = baseline ? artifact(config, artifacts::kBaselineReport)
                                      : config.output_dir / ("seat_" + label + ".json");
    json doc = json::parse(report.to_json());
    if (!config.paths.neutral_corpus.empty()) {
      std::vector<std::string> corpus;
      for (const auto& line : read_content_lines(config.paths.neutral_corpus)) corpus.push_back(trim(line.text));
      const auto ppl = pseudo_perplexity(*backend, corpus);
      doc["pseudo_perplexity"] = {{"value", ppl.value}, {"sentences", ppl.sentences_used}, {"skipped", ppl.skipped}};
      spdlog::info("eval[{}]: pseudo-perplexity {:.4f} over {} sentences", label, ppl.value, ppl.sentences_used);
    }
    write_file(report_path, doc.dump(2) + "\n");
    write_provenance(config, Stage::kEval, report_path, {{"model", model}});

    const auto baseline_path = artifact(config, artifacts::kBaselineReport);
    if (!baseline && fs::exists(baseline_path)) {
      const auto before_doc = json::parse(read_file(baseline_path));
      const auto before = EffectSizeReport::from_json(before_doc.dump());
      const auto table = format_delta_table(before, report);
      spdlog::info("eval: before/after\n{}", table);
      json delta = {{"before_average", before.average},
                    {"after_average", report.average},
                    {"delta_average", report.average - before.average},
                    {"table", table}};
      if (before_doc.contains("pseudo_perplexity") && doc.contains("pseudo_perplexity")) {
        const double b = before_doc["pseudo_perplexity"]["value"].get<double>();
        const double a = doc["pseudo_perplexity"]["value"].get<double>();
        delta["pseudo_perplexity"] = {{"before", b}, {"after", a}, {"relative_change", (a - b) / b}};
      }
      const auto delta_path = artifact(config, artifacts::kDeltaReport);
      write_file(delta_path, delta.dump(2) + "\n");
      write_provenance(config, Stage::kEval, delta_path, {{"before", sha256_file(baseline_path)}, {"after", sha256_file(report_path)}});
    }
    return report.tests.empty() ? StageStatus::kEmptyOutput : StageStatus::kOk;
  });
}

StageStatus cmd_all(const RunConfig& config, const StageOptions& options) {
  if (cmd_filter(config, options) == StageStatus::kEmptyOutput) return StageStatus::kEmptyOutput;
  if (cmd_search(config, options) == StageStatus::kEmptyOutput) return StageStatus::kEmptyOutput;
  StageOptions eval = options;
  eval.checkpoint.reset();
  if (!config.paths.seat.empty()) cmd_eval(config, eval);
  cmd_debias(config, options);
  if (!config.paths.seat.empty()) {
    eval.checkpoint = config.output_dir / artifacts::kDebiased;
    cmd_eval(config, eval);
  }
  return StageStatus::kOk;
}

}  // namespace phrasebias
