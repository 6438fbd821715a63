// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phrasebias/debias_trainer.hpp"
#include "phrasebias/error.hpp"
#include "phrasebias/masked_lm.hpp"

namespace phrasebias {

enum class Stage { kFilter, kSearch, kDebias, kEval };

struct RunConfig {
  std::string model;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  struct Paths {
    std::filesystem::path seeds;
    std::filesystem::path attributes;
    std::filesystem::path templates;
    std::filesystem::path frequency_list;
    std::filesystem::path pages;  // directory of page files
    std::vector<std::filesystem::path> seat;
    std::filesystem::path neutral_corpus;  // optional, one sentence per line
  } paths;

  struct Filter {
    int topk_per_hyponym = 40;
    int threads = 1;
  } filter;

  struct Search {
    int max_length = 5;
    int beam_width = 100;
    int vocab_size = 5000;
    int batch_size = 64;
    int threads = 1;
    bool retain_per_length = true;
  } search;

  TrainConfig train;
  bool extended_attributes = true;  // fine-tune with the extended tuple set
  ClsPooling pooling = ClsPooling::kRaw;

  // Parses a JSON document; relative paths resolve against `base_dir`.
  // Each override is "dotted.key=value" where value is JSON or a bare string.
  static RunConfig from_json(std::string_view text, const std::filesystem::path& base_dir,
                             std::span<const std::string> overrides = {});
  static RunConfig load(const std::filesystem::path& path,
                        std::span<const std::string> overrides = {});

  // Throws kConfig naming the first missing input path.
  void validate() const;

  // Hash of the settings that influence one stage (and its upstream stages).
  std::string stage_hash(Stage stage) const;
  std::string canonical_json() const;
};

// Stable artifact file names under RunConfig::output_dir.
namespace artifacts {
inline constexpr const char* kCandidates = "candidates.jsonl";
inline constexpr const char* kWeighted = "phrases_weighted.jsonl";
inline constexpr const char* kUnweighted = "phrases_unweighted.jsonl";
inline constexpr const char* kFilterSummary = "filter_summary.json";
inline constexpr const char* kPrompts = "prompts.jsonl";
inline constexpr const char* kDebiased = "debiased";
inline constexpr const char* kCheckpoints = "checkpoints";
inline constexpr const char* kTrainReport = "train_report.json";
inline constexpr const char* kBaselineReport = "seat_baseline.json";
inline constexpr const char* kDeltaReport = "seat_delta.json";
inline constexpr const char* kProvenanceSuffix = ".provenance.json";
}  // namespace artifacts

enum class StageStatus { kOk, kEmptyOutput };

struct StageOptions {
  bool force = false;  // accept upstream artifacts whose hashes do not match
  std::optional<std::filesystem::path> checkpoint;  // eval: model to evaluate
  std::string eval_label;  // eval: report name suffix, "debiased" by default
};

StageStatus cmd_filter(const RunConfig& config, const StageOptions& options = {});
StageStatus cmd_search(const RunConfig& config, const StageOptions& options = {});
StageStatus cmd_debias(const RunConfig& config, const StageOptions& options = {});
StageStatus cmd_eval(const RunConfig& config, const StageOptions& options = {});
// filter, search, baseline eval, debias, eval of the debiased checkpoint.
StageStatus cmd_all(const RunConfig& config, const StageOptions& options = {});

// 0 success, 2 config error, 3 dependency error, 4 numerical/training error,
// 5 completed with empty output, 1 anything else.
int exit_code_for(ErrorKind kind);
inline constexpr int kExitEmptyOutput = 5;

}  // namespace phrasebias
