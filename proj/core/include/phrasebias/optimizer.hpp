// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace phrasebias {

enum class OptimizerKind { kAdamW, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Moments are kept in the parameter precision of the backend that owns them.
struct OptimizerState {
  OptimizerConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m64, v64;
  std::vector<std::vector<float>> m32, v32;

  void save(const std::filesystem::path& path) const;
  static OptimizerState load(const std::filesystem::path& path, const OptimizerConfig& config);
};

template <typename Scalar>
struct ParameterBlock {
  std::string name;
  std::span<Scalar> value;
  std::span<Scalar> grad;
  bool decay = true;  // AdamW decoupled weight decay applies
};

// Decoupled AdamW (Loshchilov & Hutter) or plain SGD over every block.
void optimizer_step(std::span<const ParameterBlock<double>> blocks, OptimizerState& state);
void optimizer_step(std::span<const ParameterBlock<float>> blocks, OptimizerState& state);

}  // namespace phrasebias
