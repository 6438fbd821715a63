// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phrasebias/embedding_cache.hpp"
#include "phrasebias/masked_lm.hpp"

namespace phrasebias {

struct SeatSpec {
  std::string name;
  std::vector<std::string> targets_x;
  std::vector<std::string> targets_y;
  std::vector<std::string> attributes_a;
  std::vector<std::string> attributes_b;

  void validate() const;
};

// JSON {name, targ1, targ2, attr1, attr2}; each list is either an array of
// sentences or an object with an "examples" array. Missing name -> file stem.
SeatSpec load_seat_spec(const std::filesystem::path& path);

// Embeds sentences with cls_embedding, memoised through an optional cache.
class SentenceEncoder {
 public:
  explicit SentenceEncoder(const MaskedLM& backend, EmbeddingCache* cache = nullptr);

  Vector encode(std::string_view sentence) const;

 private:
  const MaskedLM& backend_;
  EmbeddingCache* cache_;
  std::string model_key_;
};

// mean_a cos(w, a) - mean_b cos(w, b).
double association(const SentenceEncoder& encoder, std::string_view sentence,
                   std::span<const std::string> a, std::span<const std::string> b);
double association(const MaskedLM& backend, std::string_view sentence,
                   std::span<const std::string> a, std::span<const std::string> b);

// Signed effect size with the population standard deviation over X u Y.
double effect_size(const SentenceEncoder& encoder, const SeatSpec& spec);
double effect_size(const MaskedLM& backend, const SeatSpec& spec);

struct SeatTestResult {
  std::string name;
  std::optional<double> signed_effect_size;
  std::string error;

  double magnitude() const;
};

struct EffectSizeReport {
  std::string model_id;
  std::string timestamp;
  std::vector<SeatTestResult> tests;
  double average = 0.0;  // mean of |effect size| over the tests that succeeded

  // Stable JSON without the timestamp.
  std::string body_json() const;
  std::string to_json() const;
  static EffectSizeReport from_json(std::string_view text);
};

// Per-test failures are recorded in the report; the suite keeps going.
EffectSizeReport run_seat_suite(const MaskedLM& backend, std::span<const SeatSpec> specs,
                                EmbeddingCache* cache = nullptr);

// Plain-text before/after table with one row per test plus the average.
std::string format_delta_table(const EffectSizeReport& before, const EffectSizeReport& after);

}  // namespace phrasebias
