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
#include <cmath>
#include <cstdint>
#include <vector>

#include "hierattn/doc_model.hpp"
#include "hierattn/engine.hpp"
#include "hierattn/rng.hpp"

namespace testutil {

inline hierattn::DocTree random_tree(hierattn::rng::Rng& gen, int max_secs = 4,
                                     int max_sents = 4, int max_toks = 6, int vocab = 50) {
  std::vector<std::vector<std::vector<std::int32_t>>> sections(
      static_cast<std::size_t>(gen.uniform_int(1, max_secs)));
  for (auto& section : sections) {
    section.resize(static_cast<std::size_t>(gen.uniform_int(1, max_sents)));
    for (auto& sentence : section) {
      sentence.resize(static_cast<std::size_t>(gen.uniform_int(1, max_toks)));
      for (auto& id : sentence) id = gen.uniform_int(0, vocab - 1);
    }
  }
  return hierattn::build_tree(std::move(sections));
}

// Independent evaluation of the three per-level Iverson products ORed
// together, straight from their definitions.
inline bool iverson_allowed(const hierattn::HierPos& a, const hierattn::HierPos& b) {
  const int m_doc = (a.sentence == 0 ? 1 : 0) * (b.sentence == 0 ? 1 : 0);
  const int m_sec =
      (a.token == 0 ? 1 : 0) * (b.token == 0 ? 1 : 0) * (a.section == b.section ? 1 : 0);
  const int m_sent =
      (a.section == b.section ? 1 : 0) * (a.sentence == b.sentence ? 1 : 0);
  return (m_doc | m_sec | m_sent) != 0;
}

inline std::vector<std::uint8_t> brute_force_mask(const hierattn::LinearDoc& doc) {
  const int n = doc.n();
  std::vector<std::uint8_t> dense(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      dense[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
            static_cast<std::size_t>(j)] =
          iverson_allowed(doc.tokens[static_cast<std::size_t>(i)].pos,
                          doc.tokens[static_cast<std::size_t>(j)].pos)
              ? 1
              : 0;
  return dense;
}

// Plain two-pass softmax attention, kept independent of the engine.
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> naive_attention(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& q,
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& k,
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& v) {
  const int n = static_cast<int>(q.rows());
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> a =
      q * k.transpose() / static_cast<S>(std::sqrt(static_cast<double>(q.cols())));
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out(n, v.cols());
  for (int i = 0; i < n; ++i) {
    S denom = S(0);
    for (int j = 0; j < n; ++j) denom += std::exp(a(i, j));
    Eigen::Matrix<S, 1, Eigen::Dynamic> row = Eigen::Matrix<S, 1, Eigen::Dynamic>::Zero(v.cols());
    for (int j = 0; j < n; ++j) row += (std::exp(a(i, j)) / denom) * v.row(j);
    out.row(i) = row;
  }
  return out;
}

// Per-row explicit renormalization over unmasked logits.
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> naive_masked_attention(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& q,
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& k,
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& v,
    const std::vector<std::uint8_t>& dense) {
  const int n = static_cast<int>(q.rows());
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> a =
      q * k.transpose() / static_cast<S>(std::sqrt(static_cast<double>(q.cols())));
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out(n, v.cols());
  for (int i = 0; i < n; ++i) {
    S denom = S(0);
    Eigen::Matrix<S, 1, Eigen::Dynamic> row = Eigen::Matrix<S, 1, Eigen::Dynamic>::Zero(v.cols());
    for (int j = 0; j < n; ++j) {
      if (!dense[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                 static_cast<std::size_t>(j)])
        continue;
      const S w = std::exp(a(i, j));
      denom += w;
      row += w * v.row(j);
    }
    out.row(i) = row / denom;
  }
  return out;
}

template <class S>
S max_abs_diff(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& a,
               const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testutil
