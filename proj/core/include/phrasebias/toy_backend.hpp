// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "phrasebias/masked_lm.hpp"

namespace phrasebias {

// Parameters of the deterministic toy masked LM:
//
//   context   c   = mean_j embed[x_j]
//   hidden    h_p = tanh(embed[x_p] + position[p] + mix * c)
//   logits    z_p = head_weight * h_p + head_bias
//   cls           = cls_projection * c
//
// Every quantity is hand-computable, which is what the oracle tests need.
struct ToyParameters {
  Matrix embed;           // vocab x dim
  Matrix position;        // max_length x dim
  Matrix head_weight;     // vocab x dim
  Vector head_bias;       // vocab
  double mix = 1.0;
  Matrix cls_projection;  // dim x dim

  int vocab_size() const { return static_cast<int>(embed.rows()); }
  int dim() const { return static_cast<int>(embed.cols()); }
  int max_length() const { return static_cast<int>(position.rows()); }

  // Zero-filled parameters with identity cls projection and mix = 1.
  static ToyParameters zeros(int vocab_size, int dim, int max_length = 64);
};

// Ids 0..3 are [PAD] [CLS] [SEP] [MASK]. Explicit words follow from id 4.
// Other words resolve through "tok<N>" literals or a stable hash into the
// remaining ids, so any text can be encoded.
class ToyBackend final : public MaskedLM {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kFirstWord = 4;

  ToyBackend(ToyParameters params, std::vector<std::string> words = {},
             std::string identifier = "toy:custom");

  const ModelInfo& info() const override { return info_; }
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  Vector cls_embedding(const TokenSequence& seq) const override;
  Matrix mask_logits(const TokenSequence& seq) const override;
  void accumulate_mask_logits_grad(const TokenSequence& seq, const Matrix& dlogits) override;
  void zero_grad() override;
  void apply_gradient_step(OptimizerState& state) override;
  std::unique_ptr<MaskedLM> clone() const override;
  void copy_parameters_from(const MaskedLM& other) override;
  void save(const std::filesystem::path& dir) const override;
  std::size_t parameter_count() const override;
  double gradient_norm_squared() const override;
  std::string parameter_hash() const override;

  static std::unique_ptr<ToyBackend> load(const std::filesystem::path& dir);

  void set_trainable(bool trainable) { info_.trainable = trainable; }

  const ToyParameters& params() const { return params_; }
  ToyParameters& mutable_params() { return params_; }
  const ToyParameters& grads() const { return grads_; }

  // Flattened (value, gradient) views in a fixed order: embed, position,
  // head_weight, head_bias, mix, cls_projection.
  std::vector<ParameterBlock<double>> parameter_blocks();

  TokenId word_id(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  ToyParameters params_;
  ToyParameters grads_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> word_ids_;
  ModelInfo info_;
};

// Seeded random toy model. Throws kConfig for vocab_size < 8 or hidden_dim < 2.
std::unique_ptr<ToyBackend> make_toy_backend(std::uint64_t seed, int vocab_size, int hidden_dim);

}  // namespace phrasebias
