// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace phrasebias {

using TokenId = std::int32_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace phrasebias
