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
#include <vector>

#include "hierattn/doc_model.hpp"
#include "hierattn/mask.hpp"
#include "hierattn/rng.hpp"

namespace hierattn::engine {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kDefaultBlockQ = 128;
inline constexpr int kDefaultBlockK = 64;

template <class S>
struct AttentionInput {
  Mat<S> q, k, v;  // n x d_k each
  S scale;         // 1 / sqrt(d_k)
};

// Validates shapes and finiteness and fills in the logit scale.
template <class S>
AttentionInput<S> make_attention_input(Mat<S> q, Mat<S> k, Mat<S> v);

template <class S>
AttentionInput<S> random_attention_input(int n, int d_k, rng::Rng& gen);

// Unmasked reference: O = softmax(Q K^T / sqrt(d_k)) V, softmax row-wise.
template <class S>
Mat<S> dense_attention(const AttentionInput<S>& in);

// Masked reference: masked logits are -inf; each row's weights renormalize
// over its unmasked keys. Requires the dense mask form. A row with no
// unmasked key raises NumericError("EmptyRow...").
template <class S>
Mat<S> dense_masked_attention(const AttentionInput<S>& in, const mask::AttnMask& m);

// Stable key/value reordering by hierarchy level; queries stay in place.
struct LevelPermutation {
  std::vector<std::int32_t> perm;     // sorted position -> original index
  std::vector<std::int32_t> inverse;  // original index -> sorted position
};

LevelPermutation identity_permutation(int n);
LevelPermutation sort_kv(const LinearDoc& doc);

// Tile occupancy of the (query, permuted-key) plane.
struct BlockGrid {
  int b_q = kDefaultBlockQ;
  int b_k = kDefaultBlockK;
  int t_r = 0;  // query tiles
  int t_c = 0;  // key tiles
  std::vector<std::uint8_t> nonempty;  // t_r * t_c row-major

  bool tile(int i, int j) const {
    return nonempty[static_cast<std::size_t>(i) * static_cast<std::size_t>(t_c) +
                    static_cast<std::size_t>(j)] != 0;
  }
  long total() const { return static_cast<long>(t_r) * t_c; }
  long nonempty_count() const;
  double skip_ratio() const;
};

// Occupancy comes from the sparse edge list with key columns permuted;
// no dense n^2 scan.
BlockGrid build_block_grid(const LinearDoc& doc, const LevelPermutation& perm, int b_q, int b_k);

// Block-tiled masked attention with online-softmax statistics, level-sorted
// keys/values and empty-tile skipping. The per-tile mask is recomputed from
// hierarchy positions; the edge list only decides tile occupancy. Equals
// dense_masked_attention up to floating-point tolerance.
template <class S>
Mat<S> tiled_forward(const AttentionInput<S>& in, const LinearDoc& doc,
                     int b_q = kDefaultBlockQ, int b_k = kDefaultBlockK);

// Same kernel under an explicit key permutation (identity reproduces the
// unsorted tiling). Output is permutation-invariant; only skip counts change.
template <class S>
Mat<S> tiled_forward_with_permutation(const AttentionInput<S>& in, const LinearDoc& doc,
                                      const LevelPermutation& perm, int b_q, int b_k);

struct SkipReport {
  long total_blocks = 0;
  long nonempty_sorted = 0;
  long nonempty_unsorted = 0;
  double skip_ratio_sorted = 0.0;
  double skip_ratio_unsorted = 0.0;
  double flops_proxy = 0.0;  // nonempty_sorted * b_q * b_k * d_k
};

SkipReport skip_report(const LinearDoc& doc, int b_q, int b_k, int d_k = 64);

// Tile count of a fixed sliding-window pattern (window/2 keys on each side),
// used only as a comparator in block statistics.
long fixed_window_tile_count(int n, int window, int b_q, int b_k);

template <class S>
struct MhaParams {
  Mat<S> wq, wk, wv, wo;  // d_model x d_model
};

// Per-head projections, tiled attention per head, concatenation, output
// projection.
template <class S>
Mat<S> multi_head_attention(const Mat<S>& x, const MhaParams<S>& p, int heads,
                            const LinearDoc& doc, int b_q = kDefaultBlockQ,
                            int b_k = kDefaultBlockK);

// Dense-masked variant for arbitrary masks (tree-shaped patterns, baselines).
template <class S>
Mat<S> multi_head_attention(const Mat<S>& x, const MhaParams<S>& p, int heads,
                            const mask::AttnMask& m);

}  // namespace hierattn::engine
