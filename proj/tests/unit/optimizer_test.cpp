// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "phrasebias/optimizer.hpp"
#include "test_support.hpp"

namespace phrasebias {
namespace {

TEST(Optimizer, AdamWMatchesTorchReference) {
  // torch.optim.AdamW(lr=0.1, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01), float64.
  std::vector<double> value = {0.5, -1.0, 2.0};
  std::vector<double> grad(3);
  std::vector<ParameterBlock<double>> blocks = {{"w", value, grad, true}};
  OptimizerState state;
  state.config.learning_rate = 0.1;
  const std::vector<std::vector<double>> steps = {{0.3, -0.2, 1.0}, {0.1, 0.4, -0.5}, {-0.7, 0.0, 0.25}};
  for (const auto& g : steps) {
    grad = g;
    optimizer_step(std::span<const ParameterBlock<double>>(blocks), state);
  }
  EXPECT_NEAR(value[0], 0.34220911676991045, 1e-12);
  EXPECT_NEAR(value[1], -0.9620765528364229, 1e-12);
  EXPECT_NEAR(value[2], 1.8335559147664766, 1e-12);
  EXPECT_EQ(state.step, 3);
}

TEST(Optimizer, SgdIsPlainDescent) {
  std::vector<float> value = {1.0f, 2.0f};
  std::vector<float> grad = {0.5f, -1.0f};
  std::vector<ParameterBlock<float>> blocks = {{"w", value, grad, false}};
  OptimizerState state;
  state.config.kind = OptimizerKind::kSgd;
  state.config.learning_rate = 0.1;
  optimizer_step(std::span<const ParameterBlock<float>>(blocks), state);
  EXPECT_FLOAT_EQ(value[0], 0.95f);
  EXPECT_FLOAT_EQ(value[1], 2.1f);
}

TEST(Optimizer, StateRoundTripsThroughDisk) {
  testing::TempDir dir;
  std::vector<double> value = {1.0, 2.0, 3.0};
  std::vector<double> grad = {0.1, 0.2, 0.3};
  std::vector<ParameterBlock<double>> blocks = {{"w", value, grad, true}};
  OptimizerState state;
  optimizer_step(std::span<const ParameterBlock<double>>(blocks), state);
  state.save(dir / "opt.safetensors");
  auto loaded = OptimizerState::load(dir / "opt.safetensors", state.config);
  EXPECT_EQ(loaded.step, 1);
  EXPECT_EQ(loaded.m64, state.m64);
  EXPECT_EQ(loaded.v64, state.v64);
}

TEST(Optimizer, RejectsNonPositiveRate) {
  std::vector<double> value = {1.0}, grad = {1.0};
  std::vector<ParameterBlock<double>> blocks = {{"w", value, grad, true}};
  OptimizerState state;
  state.config.learning_rate = 0.0;
  EXPECT_ERROR_KIND(optimizer_step(std::span<const ParameterBlock<double>>(blocks), state),
                    ErrorKind::kConfig);
}

}  // namespace
}  // namespace phrasebias
