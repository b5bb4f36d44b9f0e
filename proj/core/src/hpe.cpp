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

#include "hierattn/hpe.hpp"

#include <cmath>
#include <string>

#include "hierattn/errors.hpp"

namespace hierattn::hpe {

namespace {

void validate(const EncodingConfig& cfg) {
  if (cfg.d_model <= 0 || cfg.d_model % 2 != 0)
    throw DataError("EncodingConfig: d_model must be a positive even integer, got " +
                    std::to_string(cfg.d_model));
  if (cfg.levels < 1) throw DataError("EncodingConfig: levels must be >= 1");
  if (cfg.base <= 0.0) throw DataError("EncodingConfig: base must be positive");
}

}  // namespace

double omega(int k, const EncodingConfig& cfg) {
  validate(cfg);
  if (k < 0 || k >= cfg.d_model / 2)
    throw DataError("omega: k must lie in [0, d_model/2), got " + std::to_string(k));
  return std::pow(cfg.base, -2.0 * k / cfg.d_model);
}

std::vector<double> encode_position(std::span<const std::int32_t> p, const EncodingConfig& cfg) {
  validate(cfg);
  if (static_cast<int>(p.size()) != cfg.levels)
    throw DataError("encode_position: index vector length " + std::to_string(p.size()) +
                    " does not match levels " + std::to_string(cfg.levels));
  std::vector<double> out(static_cast<std::size_t>(cfg.d_model), 0.0);
  for (int k = 0; k < cfg.d_model / 2; ++k) {
    const double w = std::pow(cfg.base, -2.0 * k / cfg.d_model);
    double s = 0.0, c = 0.0;
    for (std::int32_t pl : p) {
      s += std::sin(w * pl);
      c += std::cos(w * pl);
    }
    out[static_cast<std::size_t>(2 * k)] = s;
    out[static_cast<std::size_t>(2 * k + 1)] = c;
  }
  return out;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> encode_sequence(const LinearDoc& doc,
                                                                      const EncodingConfig& cfg) {
  validate(cfg);
  if (cfg.levels != kLevels)
    throw DataError("encode_sequence: document positions carry " + std::to_string(kLevels) +
                    " levels, config expects " + std::to_string(cfg.levels));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(doc.n(), cfg.d_model);
  for (int i = 0; i < doc.n(); ++i) {
    const HierPos& p = doc.tokens[static_cast<std::size_t>(i)].pos;
    const std::int32_t levels[kLevels] = {p.section, p.sentence, p.token};
    const std::vector<double> row = encode_position({levels, kLevels}, cfg);
    for (int c = 0; c < cfg.d_model; ++c)
      out(i, c) = static_cast<Scalar>(row[static_cast<std::size_t>(c)]);
  }
  return out;
}

template Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> encode_sequence<float>(
    const LinearDoc&, const EncodingConfig&);
template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> encode_sequence<double>(
    const LinearDoc&, const EncodingConfig&);

}  // namespace hierattn::hpe
