// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "phrasebias/masked_lm.hpp"

namespace phrasebias {

struct BackendOptions {
  bool trainable = true;
  ClsPooling pooling = ClsPooling::kRaw;
};

using BackendFactory =
    std::function<std::unique_ptr<MaskedLM>(std::string_view argument, const BackendOptions&)>;

// Resolves a model identifier:
//   "toy:<seed>"                    toy backend, vocab 4096, dim 16
//   "toy:<seed>:<vocab>:<dim>"      toy backend with explicit sizes
//   "<scheme>:<arg>"                any factory registered for <scheme>
//   "<directory>"                   saved checkpoint; config.json model_type
//                                   selects bert, distilbert or toy
std::unique_ptr<MaskedLM> load_backend(std::string_view identifier,
                                       const BackendOptions& options = {});

// Plugin seam for out-of-tree backends. Replaces an existing scheme.
void register_backend_factory(const std::string& scheme, BackendFactory factory);

}  // namespace phrasebias
