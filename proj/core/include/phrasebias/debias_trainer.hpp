// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phrasebias/bias_objective.hpp"
#include "phrasebias/prompt_search.hpp"

namespace phrasebias {

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 0.01;
  int batch_size = 8;
  int max_epochs = 20;
  int patience = 2;
  double eval_fraction = 0.1;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdamW;

  void validate() const;
};

// One (prompt, attribute tuple, bucket) triple.
struct TrainingItem {
  std::vector<TokenId> prompt;
  std::size_t tuple_index = 0;
  std::size_t bucket_index = 0;

  bool operator==(const TrainingItem&) const = default;
};

struct TrainingData {
  std::vector<TrainingItem> items;
  AttributeTuples tuples;
  std::vector<PhraseBucket> buckets;
};

// Cartesian product prompts x tuples x buckets. Throws kContract on empty
// inputs and kConsistency for prompt tokens outside the model vocabulary.
TrainingData build_training_items(const BiasedPromptSet& prompts, const AttributeTuples& tuples,
                                  std::vector<PhraseBucket> buckets, const MaskedLM& backend);

// Summed tuple-bucket JSD over the given items.
double items_loss(const MaskedLM& backend, const TrainingData& data,
                  std::span<const std::size_t> item_indices);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double initial_heldout_loss = 0.0;
  double best_heldout_loss = 0.0;
  int best_epoch = 0;  // 0 means the initial state was never improved on
  int stopped_epoch = 0;
  bool early_stopped = false;
  std::size_t train_items = 0;
  std::size_t heldout_items = 0;
  double wall_seconds = 0.0;

  // Everything except wall time.
  bool same_trajectory(const TrainReport& other) const;
  std::string to_json() const;
};

struct CheckpointOptions {
  std::filesystem::path dir;  // epoch checkpoints and trainer state live here
  bool resume = false;
};

// Minimises the summed tuple-bucket JSD with early stopping on a held-out
// split, leaving the backend at the best held-out state. A non-finite loss
// restores that state and throws kTraining.
TrainReport finetune(MaskedLM& backend, const TrainingData& data, const TrainConfig& config,
                     const CheckpointOptions* checkpoints = nullptr);

struct PerplexityResult {
  double value = 0.0;  // mean per-sentence masked-token negative log-likelihood
  std::size_t sentences_used = 0;
  std::size_t skipped = 0;  // sentences beyond the model's max length
};

PerplexityResult pseudo_perplexity(const MaskedLM& backend, std::span<const std::string> corpus);

}  // namespace phrasebias
