// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phrasebias/optimizer.hpp"
#include "phrasebias/types.hpp"

namespace phrasebias {

inline constexpr std::string_view kMaskPlaceholder = "[MASK]";

struct SpecialTokens {
  TokenId mask = 0;
  TokenId cls = 0;
  TokenId sep = 0;
  TokenId pad = 0;
  TokenId unk = -1;  // -1 when the vocabulary has no unknown token

  bool is_special(TokenId id) const {
    return id == mask || id == cls || id == sep || id == pad || id == unk;
  }
};

// Which vector cls_embedding returns. kRaw is the final-layer hidden state at
// the [CLS] position; kPooler additionally applies the pretrained pooler.
enum class ClsPooling { kRaw, kPooler };

struct ModelInfo {
  std::string identifier;
  int vocab_size = 0;
  SpecialTokens special;
  int hidden_dim = 0;
  int max_length = 0;
  bool trainable = true;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::size_t> mask_positions;  // sorted, each pointing at the mask id

  // Builds a sequence and derives mask_positions from `mask_id` occurrences.
  static TokenSequence from_ids(std::vector<TokenId> ids, TokenId mask_id);

  std::size_t size() const { return ids.size(); }
};

// Masked language model seam. Inference methods are const and safe to call
// concurrently; gradient accumulation and parameter updates require exclusive
// access.
class MaskedLM {
 public:
  virtual ~MaskedLM() = default;

  virtual const ModelInfo& info() const = 0;

  // Word-piece ids for `text` without sentence delimiters. "[MASK]" maps to the
  // mask id. Throws kContract on empty input.
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;

  // [CLS] encode(text) [SEP]; throws kLength beyond max_length.
  TokenSequence tokenize(std::string_view text) const;
  // Wraps already-encoded ids with the sentence delimiters.
  TokenSequence wrap(std::span<const TokenId> body) const;

  virtual Vector cls_embedding(const TokenSequence& seq) const = 0;

  // One row per mask position, raw pre-softmax scores over the vocabulary.
  virtual Matrix mask_logits(const TokenSequence& seq) const = 0;

  // Adds d(loss)/d(parameters) given d(loss)/d(mask_logits(seq)).
  virtual void accumulate_mask_logits_grad(const TokenSequence& seq, const Matrix& dlogits) = 0;
  virtual void zero_grad() = 0;
  // Consumes the accumulated gradient. Throws kCapability when not trainable.
  virtual void apply_gradient_step(OptimizerState& state) = 0;

  virtual std::unique_ptr<MaskedLM> clone() const = 0;
  // Overwrites parameters with those of `other`, which must share the architecture.
  virtual void copy_parameters_from(const MaskedLM& other) = 0;

  virtual void save(const std::filesystem::path& dir) const = 0;

  virtual std::size_t parameter_count() const = 0;
  virtual double gradient_norm_squared() const = 0;

  // Stable fingerprint of the current parameters.
  virtual std::string parameter_hash() const = 0;

 protected:
  void validate(const TokenSequence& seq) const;
};

}  // namespace phrasebias
