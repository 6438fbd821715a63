// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include "phrasebias/bert_backend.hpp"
#include "phrasebias/bias_objective.hpp"
#include "phrasebias/prompt_search.hpp"
#include "phrasebias/toy_backend.hpp"

namespace phrasebias {
namespace {

PhraseBucket random_bucket(int length, int phrases, int vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> pick(ToyBackend::kFirstWord, vocab - 1);
  PhraseBucket b;
  b.length = length;
  for (int i = 0; i < phrases; ++i) {
    std::vector<TokenId> ids;
    for (int l = 0; l < length; ++l) ids.push_back(pick(rng));
    b.support.push_back(static_cast<std::size_t>(i));
    b.phrases.push_back("p" + std::to_string(i));
    b.token_ids.push_back(std::move(ids));
    b.weights.push_back(1.0 + (i % 3));
  }
  return b;
}

void BM_Jsd(benchmark::State& state) {
  const auto m = static_cast<int>(state.range(0));
  const auto n = static_cast<Eigen::Index>(state.range(1));
  std::vector<PhraseDistribution> dists(static_cast<std::size_t>(m));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (auto& d : dists) {
    d.probs = Vector(n);
    for (Eigen::Index i = 0; i < n; ++i) d.probs[i] = u(rng);
    d.probs /= d.probs.sum();
    d.support.resize(static_cast<std::size_t>(n));
  }
  std::vector<Vector> grads;
  for (auto _ : state) benchmark::DoNotOptimize(jsd_with_gradient(dists, grads));
}
BENCHMARK(BM_Jsd)->Args({2, 100})->Args({2, 2000})->Args({3, 2000});

void BM_PromptLoss(benchmark::State& state) {
  auto model = make_toy_backend(1, 2000, 32);
  AttributeTuples tuples{{{"he", "she"}, {"man", "woman"}}, 2};
  std::vector<PhraseBucket> buckets = {random_bucket(1, 300, 2000, 2), random_bucket(2, 200, 2000, 3)};
  PromptCandidate prompt{{10, 11, 12}};
  for (auto _ : state) benchmark::DoNotOptimize(prompt_loss(*model, prompt, tuples, buckets));
}
BENCHMARK(BM_PromptLoss);

void BM_BeamStep(benchmark::State& state) {
  auto model = make_toy_backend(1, 500, 16);
  AttributeTuples tuples{{{"he", "she"}}, 2};
  std::vector<PhraseBucket> buckets = {random_bucket(1, 50, 500, 2)};
  SearchConfig config;
  config.max_length = 2;
  config.beam_width = 4;
  for (TokenId id = 20; id < 20 + state.range(0); ++id) config.search_vocab.push_back(id);
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(*model, config, tuples, buckets));
}
BENCHMARK(BM_BeamStep)->Arg(16)->Arg(64);

void BM_ToyForward(benchmark::State& state) {
  auto model = make_toy_backend(1, 30000, 64);
  auto seq = model->tokenize("the doctor said that [MASK] [MASK] was late .");
  for (auto _ : state) benchmark::DoNotOptimize(model->mask_logits(seq));
}
BENCHMARK(BM_ToyForward);

void BM_TinyBertForwardBackward(benchmark::State& state) {
  auto model = BertBackend::load(std::string(PHRASEBIAS_FIXTURE_DIR) + "/tiny_bert");
  auto seq = model->tokenize("the woman likes [MASK] [MASK] poetry .");
  Matrix dl = Matrix::Ones(2, model->info().vocab_size);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model->mask_logits(seq));
    model->accumulate_mask_logits_grad(seq, dl);
  }
}
BENCHMARK(BM_TinyBertForwardBackward);

}  // namespace
}  // namespace phrasebias

BENCHMARK_MAIN();
