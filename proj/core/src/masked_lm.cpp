// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/masked_lm.hpp"

#include <algorithm>

#include "phrasebias/error.hpp"

namespace phrasebias {

TokenSequence TokenSequence::from_ids(std::vector<TokenId> ids, TokenId mask_id) {
  TokenSequence seq;
  seq.ids = std::move(ids);
  for (std::size_t i = 0; i < seq.ids.size(); ++i)
    if (seq.ids[i] == mask_id) seq.mask_positions.push_back(i);
  return seq;
}

TokenSequence MaskedLM::tokenize(std::string_view text) const {
  auto body = encode(text);
  return wrap(body);
}

TokenSequence MaskedLM::wrap(std::span<const TokenId> body) const {
  const auto& special = info().special;
  std::vector<TokenId> ids;
  ids.reserve(body.size() + 2);
  ids.push_back(special.cls);
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(special.sep);
  if (static_cast<int>(ids.size()) > info().max_length)
    fail(ErrorKind::kLength, "sequence of " + std::to_string(ids.size()) +
                                 " tokens exceeds max length " + std::to_string(info().max_length));
  return TokenSequence::from_ids(std::move(ids), special.mask);
}

void MaskedLM::validate(const TokenSequence& seq) const {
  const auto& inf = info();
  if (seq.ids.empty()) fail(ErrorKind::kContract, "empty token sequence");
  if (static_cast<int>(seq.ids.size()) > inf.max_length)
    fail(ErrorKind::kLength, "sequence of " + std::to_string(seq.ids.size()) +
                                 " tokens exceeds max length " + std::to_string(inf.max_length));
  for (auto id : seq.ids)
    if (id < 0 || id >= inf.vocab_size)
      fail(ErrorKind::kDomain, "token id " + std::to_string(id) + " outside vocabulary");
  if (!std::is_sorted(seq.mask_positions.begin(), seq.mask_positions.end()))
    fail(ErrorKind::kContract, "mask positions must be sorted");
  for (auto p : seq.mask_positions)
    if (p >= seq.ids.size() || seq.ids[p] != inf.special.mask)
      fail(ErrorKind::kContract, "mask position " + std::to_string(p) + " does not hold the mask token");
}

}  // namespace phrasebias
