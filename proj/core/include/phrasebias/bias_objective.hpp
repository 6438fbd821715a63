// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phrasebias/masked_lm.hpp"
#include "phrasebias/phrase_filter.hpp"
#include "phrasebias/seed_lists.hpp"

namespace phrasebias {

// Additive smoothing inside every logarithm of the divergences.
inline constexpr double kLogEpsilon = 1e-12;

// Trigger-token body placed between the attribute and the masks.
struct PromptCandidate {
  std::vector<TokenId> tokens;

  std::size_t length() const { return tokens.size(); }
};

// Stereotype phrases sharing one token length. Weights realise the
// multiplicity of a phrase in a weighted phrase set: a weight w behaves like
// w identical copies of the phrase in the softmax support.
struct PhraseBucket {
  int length = 0;
  std::vector<std::size_t> support;  // entry index of each phrase in its PhraseSet
  std::vector<std::string> phrases;
  std::vector<std::vector<TokenId>> token_ids;
  std::vector<double> weights;

  std::size_t size() const { return phrases.size(); }
};

// One bucket per populated token length, ascending. With use_multiplicity,
// repeated phrases collapse into one support element weighted by count.
std::vector<PhraseBucket> make_buckets(const PhraseSet& set, const MaskedLM& backend,
                                       bool use_multiplicity);

struct PhraseDistribution {
  int bucket_length = 0;
  std::vector<std::size_t> support;
  Vector probs;
};

// [CLS] attribute prompt [MASK]*n [SEP]; throws kLength beyond max_length.
TokenSequence build_prompt(const MaskedLM& backend, std::string_view attribute,
                           const PromptCandidate& prompt, int n);

// score_i = sum over mask rows l of logits(l, token_i[l]).
Vector phrase_scores(const Matrix& logits, const PhraseBucket& bucket);

// softmax(score_i + log weight_i) over the bucket.
PhraseDistribution distribution_from_logits(const Matrix& logits, const PhraseBucket& bucket);

PhraseDistribution phrase_distribution(const MaskedLM& backend, const PromptCandidate& prompt,
                                       std::string_view attribute, const PhraseBucket& bucket);

// sum_v p log((p + eps) / (q + eps)), natural log. Throws kContract on support mismatch.
double kld(const PhraseDistribution& p, const PhraseDistribution& q);

// (1/m) sum_i kld(P_i, mean_j P_j). Requires m >= 2.
double jsd(std::span<const PhraseDistribution> dists);

// jsd plus d(jsd)/d(probs_i) for each argument.
double jsd_with_gradient(std::span<const PhraseDistribution> dists, std::vector<Vector>& dprobs);

// JSD of one attribute tuple on one bucket.
double tuple_bucket_loss(const MaskedLM& backend, const PromptCandidate& prompt,
                         std::span<const std::string> tuple, const PhraseBucket& bucket);

// Same value; accumulates scale * gradient into the backend.
double tuple_bucket_loss_backward(MaskedLM& backend, const PromptCandidate& prompt,
                                  std::span<const std::string> tuple, const PhraseBucket& bucket,
                                  double scale = 1.0);

// sum over tuples k and buckets n of the tuple-bucket JSD.
double prompt_loss(const MaskedLM& backend, const PromptCandidate& prompt,
                   const AttributeTuples& tuples, std::span<const PhraseBucket> buckets);

double prompt_loss_backward(MaskedLM& backend, const PromptCandidate& prompt,
                            const AttributeTuples& tuples, std::span<const PhraseBucket> buckets,
                            double scale = 1.0);

}  // namespace phrasebias
