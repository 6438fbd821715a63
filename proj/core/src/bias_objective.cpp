// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/bias_objective.hpp"

#include <cmath>
#include <unordered_map>

#include "phrasebias/error.hpp"

namespace phrasebias {

std::vector<PhraseBucket> make_buckets(const PhraseSet& set, const MaskedLM& backend, bool use_multiplicity) {
  std::vector<PhraseBucket> buckets;
  for (const auto& [length, indices] : set.length_buckets) {
    if (indices.empty()) continue;
    PhraseBucket bucket;
    bucket.length = length;
    std::unordered_map<std::string, std::size_t> slot;
    for (auto index : indices) {
      const auto& phrase = set.entries.at(index).phrase;
      if (use_multiplicity) {
        auto [it, inserted] = slot.try_emplace(phrase, bucket.phrases.size());
        if (!inserted) {
          bucket.weights[it->second] += 1.0;
          continue;
        }
      }
      auto ids = backend.encode(phrase);
      if (static_cast<int>(ids.size()) != length)
        fail(ErrorKind::kBucketing, "phrase '" + phrase + "' has " + std::to_string(ids.size()) +
                                        " tokens but sits in the length-" + std::to_string(length) + " bucket");
      bucket.support.push_back(index);
      bucket.phrases.push_back(phrase);
      bucket.token_ids.push_back(std::move(ids));
      bucket.weights.push_back(1.0);
    }
    buckets.push_back(std::move(bucket));
  }
  return buckets;
}

TokenSequence build_prompt(const MaskedLM& backend, std::string_view attribute, const PromptCandidate& prompt, int n) {
  if (n < 1) fail(ErrorKind::kContract, "mask count must be at least 1");
  const auto& info = backend.info();
  std::vector<TokenId> body = backend.encode(attribute);
  for (auto id : prompt.tokens) {
    if (id < 0 || id >= info.vocab_size) fail(ErrorKind::kDomain, "prompt token id " + std::to_string(id) + " out of range");
    if (info.special.is_special(id)) fail(ErrorKind::kContract, "prompt contains a special token");
  }
  body.insert(body.end(), prompt.tokens.begin(), prompt.tokens.end());
  body.insert(body.end(), static_cast<std::size_t>(n), info.special.mask);
  auto seq = backend.wrap(body);
  if (seq.mask_positions.size() != static_cast<std::size_t>(n))
    fail(ErrorKind::kContract, "attribute '" + std::string(attribute) + "' contains a mask token");
  return seq;
}

Vector phrase_scores(const Matrix& logits, const PhraseBucket& bucket) {
  if (logits.rows() != bucket.length)
    fail(ErrorKind::kBucketing, "logits have " + std::to_string(logits.rows()) + " mask rows for a length-" +
                                    std::to_string(bucket.length) + " bucket");
  Vector scores(static_cast<Eigen::Index>(bucket.size()));
  for (std::size_t i = 0; i < bucket.size(); ++i) {
    double s = 0.0;
    for (int l = 0; l < bucket.length; ++l) s += logits(l, bucket.token_ids[i][static_cast<std::size_t>(l)]);
    scores(static_cast<Eigen::Index>(i)) = s;
  }
  return scores;
}

PhraseDistribution distribution_from_logits(const Matrix& logits, const PhraseBucket& bucket) {
  if (bucket.size() == 0) fail(ErrorKind::kContract, "empty phrase bucket");
  Vector s = phrase_scores(logits, bucket);
  for (std::size_t i = 0; i < bucket.size(); ++i) s(static_cast<Eigen::Index>(i)) += std::log(bucket.weights[i]);
  s.array() -= s.maxCoeff();
  Vector p = s.array().exp();
  p /= p.sum();
  return {bucket.length, bucket.support, std::move(p)};
}

PhraseDistribution phrase_distribution(const MaskedLM& backend, const PromptCandidate& prompt, std::string_view attribute,
                                       const PhraseBucket& bucket) {
  if (bucket.size() == 0) fail(ErrorKind::kContract, "empty phrase bucket");
  return distribution_from_logits(backend.mask_logits(build_prompt(backend, attribute, prompt, bucket.length)), bucket);
}

namespace {

void check_support(const PhraseDistribution& a, const PhraseDistribution& b) {
  if (a.bucket_length != b.bucket_length || a.support != b.support || a.probs.size() != b.probs.size())
    fail(ErrorKind::kContract, "distributions do not share a support");
}

double raw_kld(const Vector& p, const Vector& q) {
  return (p.array() * ((p.array() + kLogEpsilon).log() - (q.array() + kLogEpsilon).log())).sum();
}

// Rounding can push a divergence a hair below zero. NaN passes through so
// callers can report it.
double clamp_nonnegative(double x) { return x < 0.0 ? 0.0 : x; }

Vector mixture(std::span<const PhraseDistribution> dists) {
  if (dists.size() < 2) fail(ErrorKind::kContract, "jsd needs at least two distributions");
  for (std::size_t i = 1; i < dists.size(); ++i) check_support(dists[0], dists[i]);
  Vector mean = Vector::Zero(dists[0].probs.size());
  for (const auto& d : dists) mean += d.probs;
  return mean / static_cast<double>(dists.size());
}

}  // namespace

double kld(const PhraseDistribution& p, const PhraseDistribution& q) {
  check_support(p, q);
  return clamp_nonnegative(raw_kld(p.probs, q.probs));
}

double jsd(std::span<const PhraseDistribution> dists) {
  const Vector mean = mixture(dists);
  double total = 0.0;
  for (const auto& d : dists) total += clamp_nonnegative(raw_kld(d.probs, mean));
  return total / static_cast<double>(dists.size());
}

double jsd_with_gradient(std::span<const PhraseDistribution> dists, std::vector<Vector>& dprobs) {
  const Vector mean = mixture(dists);
  const double m = static_cast<double>(dists.size());
  const Eigen::ArrayXd log_mean = (mean.array() + kLogEpsilon).log();
  Eigen::ArrayXd ratio_sum = Eigen::ArrayXd::Zero(mean.size());
  for (const auto& d : dists) ratio_sum += d.probs.array() / (mean.array() + kLogEpsilon);
  double total = 0.0;
  dprobs.assign(dists.size(), Vector());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const Eigen::ArrayXd p = dists[i].probs.array();
    const Eigen::ArrayXd log_p = (p + kLogEpsilon).log();
    total += clamp_nonnegative((p * (log_p - log_mean)).sum());
    dprobs[i] = ((log_p - log_mean + p / (p + kLogEpsilon)) / m - ratio_sum / (m * m)).matrix();
  }
  return total / m;
}

namespace {

void check_tuple(std::span<const std::string> tuple) {
  if (tuple.size() < 2) fail(ErrorKind::kContract, "attribute tuple needs at least two members");
}

}  // namespace

double tuple_bucket_loss(const MaskedLM& backend, const PromptCandidate& prompt, std::span<const std::string> tuple,
                         const PhraseBucket& bucket) {
  check_tuple(tuple);
  std::vector<PhraseDistribution> dists;
  dists.reserve(tuple.size());
  for (const auto& attribute : tuple) dists.push_back(phrase_distribution(backend, prompt, attribute, bucket));
  return jsd(dists);
}

double tuple_bucket_loss_backward(MaskedLM& backend, const PromptCandidate& prompt, std::span<const std::string> tuple,
                                  const PhraseBucket& bucket, double scale) {
  check_tuple(tuple);
  if (bucket.size() == 0) fail(ErrorKind::kContract, "empty phrase bucket");
  std::vector<TokenSequence> seqs;
  std::vector<PhraseDistribution> dists;
  for (const auto& attribute : tuple) {
    seqs.push_back(build_prompt(backend, attribute, prompt, bucket.length));
    dists.push_back(distribution_from_logits(backend.mask_logits(seqs.back()), bucket));
  }
  std::vector<Vector> dprobs;
  const double value = jsd_with_gradient(dists, dprobs);
  const int vocab = backend.info().vocab_size;
  for (std::size_t a = 0; a < tuple.size(); ++a) {
    const Vector& p = dists[a].probs;
    const Vector dscore = p.array() * (dprobs[a].array() - p.dot(dprobs[a]));
    Matrix dlogits = Matrix::Zero(bucket.length, vocab);
    for (std::size_t i = 0; i < bucket.size(); ++i)
      for (int l = 0; l < bucket.length; ++l)
        dlogits(l, bucket.token_ids[i][static_cast<std::size_t>(l)]) += scale * dscore(static_cast<Eigen::Index>(i));
    backend.accumulate_mask_logits_grad(seqs[a], dlogits);
  }
  return value;
}

namespace {

void check_loss_inputs(const AttributeTuples& tuples, std::span<const PhraseBucket> buckets) {
  if (tuples.tuples.empty()) fail(ErrorKind::kContract, "attribute tuple list is empty");
  if (buckets.empty()) fail(ErrorKind::kContract, "phrase set has no populated bucket");
}

}  // namespace

double prompt_loss(const MaskedLM& backend, const PromptCandidate& prompt, const AttributeTuples& tuples,
                   std::span<const PhraseBucket> buckets) {
  check_loss_inputs(tuples, buckets);
  double total = 0.0;
  for (const auto& tuple : tuples.tuples)
    for (const auto& bucket : buckets) total += tuple_bucket_loss(backend, prompt, tuple, bucket);
  return total;
}

double prompt_loss_backward(MaskedLM& backend, const PromptCandidate& prompt, const AttributeTuples& tuples,
                            std::span<const PhraseBucket> buckets, double scale) {
  check_loss_inputs(tuples, buckets);
  double total = 0.0;
  for (const auto& tuple : tuples.tuples)
    for (const auto& bucket : buckets) total += tuple_bucket_loss_backward(backend, prompt, tuple, bucket, scale);
  return total;
}

}  // namespace phrasebias
