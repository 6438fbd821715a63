// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/optimizer.hpp"

#include <cmath>

#include "phrasebias/error.hpp"
#include "phrasebias/safetensors.hpp"

namespace phrasebias {

namespace {

template <typename Scalar>
auto& first_moments(OptimizerState& s) {
  if constexpr (std::is_same_v<Scalar, double>) return s.m64; else return s.m32;
}

template <typename Scalar>
auto& second_moments(OptimizerState& s) {
  if constexpr (std::is_same_v<Scalar, double>) return s.v64; else return s.v32;
}

template <typename Scalar>
void step_impl(std::span<const ParameterBlock<Scalar>> blocks, OptimizerState& state) {
  const auto& cfg = state.config;
  if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::kConfig, "learning rate must be positive");
  ++state.step;

  if (cfg.kind == OptimizerKind::kSgd) {
    for (const auto& block : blocks) {
      const Scalar decay = block.decay ? static_cast<Scalar>(cfg.learning_rate * cfg.weight_decay) : 0;
      for (std::size_t i = 0; i < block.value.size(); ++i) {
        block.value[i] -= decay * block.value[i];
        block.value[i] -= static_cast<Scalar>(cfg.learning_rate) * block.grad[i];
      }
    }
    return;
  }

  auto& m = first_moments<Scalar>(state);
  auto& v = second_moments<Scalar>(state);
  if (m.empty()) {
    for (const auto& block : blocks) {
      m.emplace_back(block.value.size(), Scalar{0});
      v.emplace_back(block.value.size(), Scalar{0});
    }
  }
  if (m.size() != blocks.size()) fail(ErrorKind::kContract, "optimizer state does not match parameters");

  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double step_size = cfg.learning_rate / bias1;
  const double bias2_sqrt = std::sqrt(bias2);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    auto& mb = m[b];
    auto& vb = v[b];
    if (mb.size() != block.value.size()) fail(ErrorKind::kContract, "optimizer moment size mismatch");
    const double decay = block.decay ? cfg.learning_rate * cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < block.value.size(); ++i) {
      const double g = block.grad[i];
      const double mi = cfg.beta1 * mb[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * vb[i] + (1.0 - cfg.beta2) * g * g;
      mb[i] = static_cast<Scalar>(mi);
      vb[i] = static_cast<Scalar>(vi);
      double value = block.value[i];
      value -= decay * value;
      value -= step_size * mi / (std::sqrt(vi) / bias2_sqrt + cfg.epsilon);
      block.value[i] = static_cast<Scalar>(value);
    }
  }
}

template <typename Scalar>
void append_moments(std::vector<TensorToWrite>& out, const char* prefix,
                    const std::vector<std::vector<Scalar>>& moments) {
  for (std::size_t i = 0; i < moments.size(); ++i)
    out.push_back(make_tensor<Scalar>(std::string(prefix) + std::to_string(i),
                                      {static_cast<std::int64_t>(moments[i].size())},
                                      std::span<const Scalar>(moments[i])));
}

}  // namespace

void optimizer_step(std::span<const ParameterBlock<double>> blocks, OptimizerState& state) {
  step_impl<double>(blocks, state);
}

void optimizer_step(std::span<const ParameterBlock<float>> blocks, OptimizerState& state) {
  step_impl<float>(blocks, state);
}

void OptimizerState::save(const std::filesystem::path& path) const {
  std::vector<TensorToWrite> tensors;
  append_moments(tensors, "m64.", m64);
  append_moments(tensors, "v64.", v64);
  append_moments(tensors, "m32.", m32);
  append_moments(tensors, "v32.", v32);
  write_safetensors(path, tensors,
                    {{"step", std::to_string(step)},
                     {"blocks64", std::to_string(m64.size())},
                     {"blocks32", std::to_string(m32.size())}});
}

OptimizerState OptimizerState::load(const std::filesystem::path& path, const OptimizerConfig& config) {
  auto file = SafetensorsFile::open(path);
  OptimizerState state;
  state.config = config;
  state.step = std::stoll(file.metadata().at("step"));
  const auto n64 = std::stoul(file.metadata().at("blocks64"));
  const auto n32 = std::stoul(file.metadata().at("blocks32"));
  for (std::size_t i = 0; i < n64; ++i) {
    state.m64.push_back(file.read_f64("m64." + std::to_string(i)));
    state.v64.push_back(file.read_f64("v64." + std::to_string(i)));
  }
  for (std::size_t i = 0; i < n32; ++i) {
    state.m32.push_back(file.read_f32("m32." + std::to_string(i)));
    state.v32.push_back(file.read_f32("v32." + std::to_string(i)));
  }
  return state;
}

}  // namespace phrasebias
