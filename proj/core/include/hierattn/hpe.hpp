// Copyright 2026 The hierattn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "hierattn/doc_model.hpp"

namespace hierattn::hpe {

struct EncodingConfig {
  int d_model;
  int levels = kLevels;
  double base = 10000.0;
};

// omega_k = base^(-2k / d_model); defined for 0 <= k < d_model / 2.
double omega(int k, const EncodingConfig& cfg);

// Hierarchical sinusoidal encoding of an index vector p of length cfg.levels:
// out[2k] = sum_l sin(omega_k * p[l]), out[2k+1] = sum_l cos(omega_k * p[l]).
// Computed in double regardless of the model's scalar width.
std::vector<double> encode_position(std::span<const std::int32_t> p, const EncodingConfig& cfg);

// Row i encodes the hierarchy position of token i. Depends only on positions,
// never on vocabulary ids.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> encode_sequence(const LinearDoc& doc,
                                                                      const EncodingConfig& cfg);

}  // namespace hierattn::hpe
