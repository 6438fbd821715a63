// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "phrasebias/bias_objective.hpp"
#include "phrasebias/phrase_filter.hpp"
#include "phrasebias/seed_lists.hpp"
#include "phrasebias/toy_backend.hpp"
#include "test_support.hpp"
#include "toy_models.hpp"

namespace phrasebias {
namespace {

PhraseDistribution dist(std::vector<double> p) {
  PhraseDistribution d;
  d.bucket_length = 1;
  d.probs = Eigen::Map<Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  d.support.resize(p.size());
  std::iota(d.support.begin(), d.support.end(), 0);
  return d;
}

using testing::phrase_set;
using testing::planted_model;

const auto& kGender = testing::kPlantedTuples;
const auto& kPhrases = testing::kPlantedPhrases;

// --- divergences -----------------------------------------------------------

TEST(Kld, Examples) {
  EXPECT_NEAR(kld(dist({0.3, 0.7}), dist({0.3, 0.7})), 0.0, 1e-9);
  EXPECT_NEAR(kld(dist({0.5, 0.5}), dist({0.25, 0.75})), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-9);
  EXPECT_NEAR(kld(dist({1.0, 0.0}), dist({0.5, 0.5})), std::log(2.0), 1e-9);
  EXPECT_ERROR_KIND(kld(dist({1.0}), dist({0.5, 0.5})), ErrorKind::kContract);
}

TEST(Jsd, Examples) {
  std::vector<PhraseDistribution> same = {dist({0.2, 0.8}), dist({0.2, 0.8})};
  EXPECT_NEAR(jsd(same), 0.0, 1e-12);
  std::vector<PhraseDistribution> opposite = {dist({1, 0}), dist({0, 1})};
  EXPECT_NEAR(jsd(opposite), std::log(2.0), 1e-9);
  std::vector<PhraseDistribution> one = {dist({1.0})};
  EXPECT_ERROR_KIND(jsd(one), ErrorKind::kContract);
  std::vector<PhraseDistribution> mismatch = {dist({1.0}), dist({0.5, 0.5})};
  EXPECT_ERROR_KIND(jsd(mismatch), ErrorKind::kContract);
}

TEST(Jsd, BoundedAndPermutationInvariant) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 3;
    const int n = 1 + trial % 6;
    std::vector<PhraseDistribution> ds;
    for (int i = 0; i < m; ++i) {
      std::vector<double> p(static_cast<std::size_t>(n));
      for (auto& x : p) x = trial % 5 == 0 ? std::floor(u(rng) * 2) : u(rng);
      double s = std::accumulate(p.begin(), p.end(), 0.0);
      if (s == 0) p[0] = s = 1;
      for (auto& x : p) x /= s;
      ds.push_back(dist(p));
    }
    const double v = jsd(ds);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, std::log(static_cast<double>(m)) + 1e-9);
    std::shuffle(ds.begin(), ds.end(), rng);
    EXPECT_NEAR(jsd(ds), v, 1e-12);
  }
}

TEST(Jsd, GradientMatchesFiniteDifferences) {
  std::vector<PhraseDistribution> ds = {dist({0.2, 0.5, 0.3}), dist({0.6, 0.1, 0.3}), dist({0.1, 0.1, 0.8})};
  std::vector<Vector> grads;
  jsd_with_gradient(ds, grads);
  const double h = 1e-7;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (Eigen::Index v = 0; v < 3; ++v) {
      auto up = ds, down = ds;
      up[i].probs[v] += h;
      down[i].probs[v] -= h;
      EXPECT_NEAR(grads[i][v], (jsd(up) - jsd(down)) / (2 * h), 1e-6);
    }
}

// --- prompts and distributions --------------------------------------------

TEST(BuildPrompt, LayoutAndMasks) {
  auto model = planted_model();
  PromptCandidate prompt{model->encode("likes math")};
  auto seq = build_prompt(*model, "woman", prompt, 2);
  EXPECT_EQ(model->detokenize(seq.ids), "[CLS] woman likes math [MASK] [MASK] [SEP]");
  EXPECT_EQ(seq.mask_positions, (std::vector<std::size_t>{4, 5}));
  for (int n : {1, 2, 3}) EXPECT_EQ(build_prompt(*model, "he", {}, n).mask_positions.size(), static_cast<std::size_t>(n));
  EXPECT_EQ(model->detokenize(build_prompt(*model, "he", {}, 1).ids), "[CLS] he [MASK] [SEP]");
  EXPECT_ERROR_KIND(build_prompt(*model, "he", {}, 20), ErrorKind::kLength);
  EXPECT_ERROR_KIND(build_prompt(*model, "he", PromptCandidate{{ToyBackend::kSep}}, 1), ErrorKind::kContract);
}

TEST(PhraseDistribution, HandSetScores) {
  // Two length-2 phrases whose logit sums are 2.0 and 0.0.
  auto p = ToyParameters::zeros(8, 1, 8);
  p.head_weight.setZero();
  p.head_bias << 0, 0, 0, 0, 1.5, 0.5, -0.25, 0.25;
  ToyBackend model(p, {"a", "b", "c", "d"});
  PhraseSet set = phrase_set(model, {"a b", "c d"}, false);
  auto buckets = make_buckets(set, model, false);
  ASSERT_EQ(buckets.size(), 1u);
  auto d = phrase_distribution(model, {}, "a", buckets[0]);
  EXPECT_NEAR(d.probs[0], std::exp(2.0) / (std::exp(2.0) + 1), 1e-9);
  EXPECT_NEAR(d.probs[1], 1 / (std::exp(2.0) + 1), 1e-9);
  EXPECT_NEAR(d.probs[0], 0.8808, 1e-4);
}

TEST(PhraseDistribution, SingleTokenBucketIsRestrictedSoftmax) {
  auto model = make_toy_backend(3, 40, 5);
  PhraseSet set = phrase_set(*model, {"tok10", "tok11", "tok20", "tok33"}, false);
  auto buckets = make_buckets(set, *model, false);
  PromptCandidate prompt{{15, 16}};
  auto d = phrase_distribution(*model, prompt, "tok8", buckets[0]);
  Matrix logits = model->mask_logits(build_prompt(*model, "tok8", prompt, 1));
  Vector s(4);
  s << logits(0, 10), logits(0, 11), logits(0, 20), logits(0, 33);
  Vector expected = (s.array() - s.maxCoeff()).exp();
  expected /= expected.sum();
  EXPECT_TRUE(d.probs.isApprox(expected, 1e-9));
  EXPECT_NEAR(d.probs.sum(), 1.0, 1e-12);
}

TEST(PhraseDistribution, EqualLogitsGiveUniform) {
  auto model = make_toy_backend(3, 40, 5);
  model->mutable_params().head_weight.setZero();
  model->mutable_params().head_bias.setZero();
  auto buckets = make_buckets(phrase_set(*model, {"tok10 tok12", "tok11 tok13", "tok20 tok21"}, false), *model, false);
  auto d = phrase_distribution(*model, {}, "tok5", buckets[0]);
  for (double x : d.probs) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(PhraseDistribution, WrongLengthIsBucketingError) {
  auto model = make_toy_backend(3, 40, 5);
  auto set = phrase_set(*model, {"tok10 tok12", "tok11 tok13"}, false);
  set.length_buckets[1] = {0};
  set.length_buckets.erase(2);
  EXPECT_ERROR_KIND(make_buckets(set, *model, false), ErrorKind::kBucketing);
}

TEST(MakeBuckets, MultiplicityBecomesWeight) {
  auto model = planted_model();
  auto set = phrase_set(*model, {"math", "art", "math", "algebra math"}, true);
  auto weighted = make_buckets(set, *model, true);
  ASSERT_EQ(weighted.size(), 2u);
  EXPECT_EQ(weighted[0].phrases, (std::vector<std::string>{"math", "art"}));
  EXPECT_EQ(weighted[0].weights, (std::vector<double>{2.0, 1.0}));
  auto plain = make_buckets(set, *model, false);
  EXPECT_EQ(plain[0].size(), 3u);
}

// --- prompt loss ------------------------------------------------------------

TEST(PromptLoss, AttributeBlindModelHasZeroLoss) {
  auto model = planted_model();
  // Identical attribute embeddings make every attribute look the same.
  for (const char* w : {"she", "man", "woman"})
    model->mutable_params().embed.row(model->word_id(w)) = model->params().embed.row(model->word_id("he"));
  auto buckets = make_buckets(phrase_set(*model, kPhrases, false), *model, false);
  EXPECT_NEAR(prompt_loss(*model, {{model->word_id("likes")}}, kGender, buckets), 0.0, 1e-6);
}

TEST(PromptLoss, SingleTupleSingleBucketIsOneJsd) {
  auto model = planted_model();
  auto buckets = make_buckets(phrase_set(*model, {"math", "art", "poetry"}, false), *model, false);
  AttributeTuples one{{{"he", "she"}}, 2};
  PromptCandidate prompt{{model->word_id("likes")}};
  std::vector<PhraseDistribution> ds = {phrase_distribution(*model, prompt, "he", buckets[0]),
                                        phrase_distribution(*model, prompt, "she", buckets[0])};
  EXPECT_NEAR(prompt_loss(*model, prompt, one, buckets), jsd(ds), 1e-12);
}

TEST(PromptLoss, AdditiveOverTuples) {
  auto model = planted_model();
  auto buckets = make_buckets(phrase_set(*model, kPhrases, false), *model, false);
  PromptCandidate prompt{{model->word_id("likes")}};
  AttributeTuples a{{kGender.tuples[0]}, 2}, b{{kGender.tuples[1]}, 2};
  EXPECT_NEAR(prompt_loss(*model, prompt, kGender, buckets),
              prompt_loss(*model, prompt, a, buckets) + prompt_loss(*model, prompt, b, buckets), 1e-12);
  AttributeTuples empty{{}, 2};
  EXPECT_ERROR_KIND(prompt_loss(*model, prompt, empty, buckets), ErrorKind::kContract);
}

TEST(PromptLoss, PlantedBiasMatchesReferenceScript) {
  // Values from tests/oracles/planted_bias_reference.py.
  auto model = planted_model();
  auto unweighted = make_buckets(phrase_set(*model, kPhrases, false), *model, false);
  PromptCandidate likes{{model->word_id("likes")}};
  EXPECT_NEAR(prompt_loss(*model, likes, kGender, unweighted), 0.13652286523769142, 1e-9);
  EXPECT_NEAR(prompt_loss(*model, {}, kGender, unweighted), 0.19522935199186725, 1e-9);

  AttributeTuples first{{kGender.tuples[0]}, 2};
  std::vector<PhraseBucket> bucket1 = {unweighted[0]};
  EXPECT_NEAR(prompt_loss(*model, likes, first, bucket1), 0.029267871847864082, 1e-9);

  auto he = phrase_distribution(*model, likes, "he", unweighted[0]);
  const double he_ref[] = {0.3146974343826073, 0.18297308309528532, 0.19097029552055322, 0.31135918700155424};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(he.probs[i], he_ref[i], 1e-9);
  auto she = phrase_distribution(*model, likes, "she", unweighted[1]);
  const double she_ref[] = {0.23135297838041913, 0.4758832136420784, 0.29276380797750245};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(she.probs[i], she_ref[i], 1e-9);

  // Weights 2,1,3,1 and 1,2,1 realised as repeated entries.
  std::vector<std::string> repeated = {"math", "math", "art", "poetry", "poetry", "poetry", "algebra",
                                       "algebra math", "poetry art", "poetry art", "math poetry"};
  auto weighted = make_buckets(phrase_set(*model, repeated, true), *model, true);
  EXPECT_NEAR(prompt_loss(*model, likes, kGender, weighted), 0.14032318145854453, 1e-9);
}

TEST(PromptLoss, GradientMatchesFiniteDifferences) {
  auto model = planted_model();
  auto buckets = make_buckets(phrase_set(*model, kPhrases, false), *model, false);
  PromptCandidate likes{{model->word_id("likes")}};
  model->zero_grad();
  const double value = prompt_loss_backward(*model, likes, kGender, buckets);
  EXPECT_NEAR(value, prompt_loss(*model, likes, kGender, buckets), 1e-12);
  auto blocks = model->parameter_blocks();
  std::mt19937_64 rng(5);
  const double h = 1e-4;
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 25; ++trial) {
    auto& block = blocks[rng() % blocks.size()];
    const std::size_t i = rng() % block.value.size();
    const double analytic = block.grad[i];
    if (std::abs(analytic) < 1e-6) continue;
    const double saved = block.value[i];
    block.value[i] = saved + h;
    const double up = prompt_loss(*model, likes, kGender, buckets);
    block.value[i] = saved - h;
    const double down = prompt_loss(*model, likes, kGender, buckets);
    block.value[i] = saved;
    const double numeric = (up - down) / (2 * h);
    EXPECT_NEAR(analytic, numeric, 1e-4 * std::max(std::abs(numeric), 1e-3)) << block.name << "[" << i << "]";
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

}  // namespace
}  // namespace phrasebias
