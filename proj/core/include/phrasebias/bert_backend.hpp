// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "phrasebias/masked_lm.hpp"
#include "phrasebias/wordpiece.hpp"

namespace phrasebias {

enum class BertArch { kBert, kDistilBert };

struct BertConfig {
  BertArch arch = BertArch::kBert;
  int vocab_size = 0;
  int hidden = 0;
  int layers = 0;
  int heads = 0;
  int intermediate = 0;
  int max_position = 512;
  int type_vocab_size = 2;  // 0 for DistilBERT
  double layer_norm_eps = 1e-12;

  // Reads a Hugging Face config.json (model_type "bert" or "distilbert").
  static BertConfig from_json_file(const std::filesystem::path& path);
};

struct BertLoadOptions {
  bool trainable = true;
  ClsPooling pooling = ClsPooling::kRaw;
  std::string identifier;  // defaults to the directory path
};

// Native encoder-only transformer with a masked-LM head, loaded from a
// directory holding config.json, vocab.txt and model.safetensors. Supports the
// BERT and DistilBERT weight layouts; computes in float and backpropagates
// through every parameter.
class BertBackend final : public MaskedLM {
 public:
  struct Weights;

  static std::unique_ptr<BertBackend> load(const std::filesystem::path& dir,
                                           const BertLoadOptions& options = {});
  ~BertBackend() override;

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

  const BertConfig& config() const { return config_; }
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }

  // Final-layer hidden states (sequence x hidden); exposed for golden tests.
  Matrix hidden_states(const TokenSequence& seq) const;
  // Gradient of a named parameter in Hugging Face naming; exposed for golden tests.
  std::vector<float> gradient(const std::string& hf_name) const;

 private:
  BertBackend(BertConfig config, WordPieceTokenizer tokenizer, ModelInfo info, ClsPooling pooling);

  BertConfig config_;
  WordPieceTokenizer tokenizer_;
  ModelInfo info_;
  ClsPooling pooling_;
  std::filesystem::path source_dir_;
  std::unique_ptr<Weights> weights_;
  std::unique_ptr<Weights> grads_;
  mutable std::mutex hash_mutex_;
  mutable std::string hash_cache_;  // empty when stale
};

}  // namespace phrasebias
