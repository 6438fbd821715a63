// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/debias_trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "phrasebias/backend_registry.hpp"
#include "phrasebias/error.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::kConfig, "train.learning_rate must be positive");
  if (weight_decay < 0.0) fail(ErrorKind::kConfig, "train.weight_decay must be non-negative");
  if (batch_size < 1) fail(ErrorKind::kConfig, "train.batch_size must be at least 1");
  if (max_epochs < 1) fail(ErrorKind::kConfig, "train.max_epochs must be at least 1");
  if (patience < 1) fail(ErrorKind::kConfig, "train.patience must be at least 1");
  if (!(eval_fraction > 0.0 && eval_fraction < 0.5)) fail(ErrorKind::kConfig, "train.eval_fraction must lie in (0, 0.5)");
}

TrainingData build_training_items(const BiasedPromptSet& prompts, const AttributeTuples& tuples,
                                  std::vector<PhraseBucket> buckets, const MaskedLM& backend) {
  if (prompts.prompts.empty()) fail(ErrorKind::kContract, "prompt set is empty");
  if (tuples.tuples.empty()) fail(ErrorKind::kContract, "attribute tuple list is empty");
  if (buckets.empty()) fail(ErrorKind::kContract, "phrase set has no populated bucket");
  const auto& info = backend.info();
  TrainingData data;
  for (const auto& prompt : prompts.prompts) {
    for (auto id : prompt.tokens)
      if (id < 0 || id >= info.vocab_size || info.special.is_special(id))
        fail(ErrorKind::kConsistency, "prompt token " + std::to_string(id) + " is not a word of " + info.identifier);
    for (std::size_t k = 0; k < tuples.size(); ++k)
      for (std::size_t b = 0; b < buckets.size(); ++b) data.items.push_back({prompt.tokens, k, b});
  }
  data.tuples = tuples;
  data.buckets = std::move(buckets);
  return data;
}

namespace {

double item_loss(const MaskedLM& backend, const TrainingData& data, const TrainingItem& item) {
  return tuple_bucket_loss(backend, PromptCandidate{item.prompt}, data.tuples.tuples.at(item.tuple_index),
                           data.buckets.at(item.bucket_index));
}

}  // namespace

double items_loss(const MaskedLM& backend, const TrainingData& data, std::span<const std::size_t> item_indices) {
  double total = 0.0;
  for (auto i : item_indices) total += item_loss(backend, data, data.items.at(i));
  return total;
}

bool TrainReport::same_trajectory(const TrainReport& o) const {
  return epochs == o.epochs && initial_heldout_loss == o.initial_heldout_loss &&
         best_heldout_loss == o.best_heldout_loss && best_epoch == o.best_epoch && stopped_epoch == o.stopped_epoch &&
         early_stopped == o.early_stopped && train_items == o.train_items && heldout_items == o.heldout_items;
}

namespace {

nlohmann::json report_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"heldout_loss", e.heldout_loss}});
  return {{"epochs", epochs},
          {"initial_heldout_loss", r.initial_heldout_loss},
          {"best_heldout_loss", r.best_heldout_loss},
          {"best_epoch", r.best_epoch},
          {"stopped_epoch", r.stopped_epoch},
          {"early_stopped", r.early_stopped},
          {"train_items", r.train_items},
          {"heldout_items", r.heldout_items},
          {"wall_seconds", r.wall_seconds}};
}

TrainReport report_from_json(const nlohmann::json& j) {
  TrainReport r;
  for (const auto& e : j.at("epochs"))
    r.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("heldout_loss").get<double>()});
  r.initial_heldout_loss = j.at("initial_heldout_loss").get<double>();
  r.best_heldout_loss = j.at("best_heldout_loss").get<double>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.stopped_epoch = j.at("stopped_epoch").get<int>();
  r.early_stopped = j.at("early_stopped").get<bool>();
  r.train_items = j.at("train_items").get<std::size_t>();
  r.heldout_items = j.at("heldout_items").get<std::size_t>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

}  // namespace

std::string TrainReport::to_json() const { return report_json(*this).dump(2) + "\n"; }

TrainReport finetune(MaskedLM& backend, const TrainingData& data, const TrainConfig& config,
                     const CheckpointOptions* checkpoints) {
  config.validate();
  if (!backend.info().trainable) fail(ErrorKind::kCapability, backend.info().identifier + " is not trainable");
  if (data.items.size() < 2) fail(ErrorKind::kContract, "training needs at least two items");
  const auto started = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(data.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(config.seed);
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto heldout_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.eval_fraction * static_cast<double>(order.size()))), 1,
      order.size() - 1);
  const std::vector<std::size_t> heldout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(heldout_count));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(heldout_count), order.end());
  std::sort(train.begin(), train.end());

  auto heldout_loss = [&] { return items_loss(backend, data, heldout) / static_cast<double>(heldout.size()); };

  OptimizerState state;
  state.config.kind = config.optimizer;
  state.config.learning_rate = config.learning_rate;
  state.config.weight_decay = config.weight_decay;

  TrainReport report;
  report.train_items = train.size();
  report.heldout_items = heldout.size();
  auto best = backend.clone();
  int bad_epochs = 0;
  int first_epoch = 1;

  const bool checkpointing = checkpoints != nullptr && !checkpoints->dir.empty();
  const auto state_path = checkpointing ? checkpoints->dir / "trainer_state.json" : std::filesystem::path();
  if (checkpointing && checkpoints->resume && std::filesystem::exists(state_path)) {
    auto j = nlohmann::json::parse(read_file(state_path));
    report = report_from_json(j.at("report"));
    bad_epochs = j.at("bad_epochs").get<int>();
    first_epoch = j.at("epoch").get<int>() + 1;
    BackendOptions options;
    options.trainable = true;
    backend.copy_parameters_from(*load_backend((checkpoints->dir / "last").string(), options));
    best->copy_parameters_from(*load_backend((checkpoints->dir / "best").string(), options));
    state = OptimizerState::load(checkpoints->dir / "optimizer.safetensors", state.config);
    if (report.early_stopped || first_epoch > config.max_epochs) {
      backend.copy_parameters_from(*best);
      return report;
    }
  } else {
    report.initial_heldout_loss = heldout_loss();
    if (!std::isfinite(report.initial_heldout_loss)) fail(ErrorKind::kTraining, "initial held-out loss is not finite");
    report.best_heldout_loss = report.initial_heldout_loss;
    if (checkpointing) {
      std::filesystem::create_directories(checkpoints->dir);
      backend.save(checkpoints->dir / "best");
    }
  }

  auto diverged = [&](const std::string& what) {
    backend.copy_parameters_from(*best);
    fail(ErrorKind::kTraining, what + " became non-finite; restored the best state (epoch " +
                                   std::to_string(report.best_epoch) + ")");
  };

  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = first_epoch; epoch <= config.max_epochs; ++epoch) {
    std::vector<std::size_t> shuffled = train;
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(epoch));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    double train_total = 0.0;
    for (std::size_t begin = 0; begin < shuffled.size(); begin += batch) {
      backend.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = begin; k < std::min(shuffled.size(), begin + batch); ++k) {
        const auto& item = data.items[shuffled[k]];
        batch_loss += tuple_bucket_loss_backward(backend, PromptCandidate{item.prompt},
                                                 data.tuples.tuples[item.tuple_index], data.buckets[item.bucket_index]);
      }
      if (!std::isfinite(batch_loss) || !std::isfinite(backend.gradient_norm_squared())) diverged("training loss");
      backend.apply_gradient_step(state);
      train_total += batch_loss;
    }
    const double held = heldout_loss();
    if (!std::isfinite(held)) diverged("held-out loss");
    report.epochs.push_back({epoch, train_total / static_cast<double>(train.size()), held});
    report.stopped_epoch = epoch;
    const bool improved = held < report.best_heldout_loss;
    if (improved) {
      report.best_heldout_loss = held;
      report.best_epoch = epoch;
      best->copy_parameters_from(backend);
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    report.early_stopped = bad_epochs >= config.patience;
    if (checkpointing) {
      backend.save(checkpoints->dir / "last");
      if (improved) backend.save(checkpoints->dir / "best");
      state.save(checkpoints->dir / "optimizer.safetensors");
      write_file(state_path,
                 nlohmann::json{{"epoch", epoch}, {"bad_epochs", bad_epochs}, {"report", report_json(report)}}.dump(2));
    }
    if (report.early_stopped) break;
  }
  backend.copy_parameters_from(*best);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

PerplexityResult pseudo_perplexity(const MaskedLM& backend, std::span<const std::string> corpus) {
  if (corpus.empty()) fail(ErrorKind::kContract, "perplexity corpus is empty");
  const auto mask = backend.info().special.mask;
  PerplexityResult result;
  double total = 0.0;
  for (const auto& sentence : corpus) {
    TokenSequence seq;
    try {
      seq = backend.tokenize(sentence);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kLength) throw;
      ++result.skipped;
      continue;
    }
    double nll = 0.0;
    int positions = 0;
    for (std::size_t t = 1; t + 1 < seq.ids.size(); ++t) {
      if (backend.info().special.is_special(seq.ids[t])) continue;
      auto ids = seq.ids;
      const auto original = ids[t];
      ids[t] = mask;
      const Matrix logits = backend.mask_logits(TokenSequence::from_ids(std::move(ids), mask));
      const double mx = logits.row(0).maxCoeff();
      const double lse = mx + std::log((logits.row(0).array() - mx).exp().sum());
      nll += lse - logits(0, original);
      ++positions;
    }
    if (positions == 0) {
      ++result.skipped;
      continue;
    }
    total += nll / positions;
    ++result.sentences_used;
  }
  if (result.sentences_used == 0) fail(ErrorKind::kContract, "no sentence of the corpus could be scored");
  result.value = total / static_cast<double>(result.sentences_used);
  return result;
}

}  // namespace phrasebias
