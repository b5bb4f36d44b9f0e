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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hierattn/doc_model.hpp"

namespace hierattn::mask {

using Edge = std::pair<std::int32_t, std::int32_t>;  // (query, key)

// Dense mask matrices are a testing/reference form; construction is capped
// to bound memory. Engine paths consume the sparse edge list.
inline constexpr int kDenseCap = 4096;

// Boolean attention-permission matrix: entry (i, j) permits query i to
// attend key j. The dense form is present only when n <= kDenseCap (or when
// a builder was asked to skip it); the edge list is always populated and
// sorted lexicographically.
struct AttnMask {
  int n = 0;
  std::vector<std::uint8_t> dense;  // n*n row-major, possibly empty
  std::vector<Edge> edges;

  bool has_dense() const { return !dense.empty(); }
  bool at(int i, int j) const {
    return dense[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                 static_cast<std::size_t>(j)] != 0;
  }
  std::int64_t nnz() const { return static_cast<std::int64_t>(edges.size()); }
};

AttnMask from_dense(int n, std::vector<std::uint8_t> dense);
AttnMask from_edges(int n, std::vector<Edge> edges, bool build_dense);
AttnMask all_true(int n);

// Per-pair permission for 3-level document positions: the OR of the
// document-, section- and sentence-level Iverson products.
inline bool pair_allowed(const HierPos& a, const HierPos& b) {
  const bool doc_level = a.sentence == 0 && b.sentence == 0;
  const bool sec_level = a.token == 0 && b.token == 0 && a.section == b.section;
  const bool sent_level = a.section == b.section && a.sentence == b.sentence;
  return doc_level || sec_level || sent_level;
}

struct LevelMasks {
  AttnMask doc;   // [p2_i = 0][p2_j = 0]
  AttnMask sec;   // [p3_i = 0][p3_j = 0][p1_i = p1_j]
  AttnMask sent;  // [p1_i = p1_j][p2_i = p2_j]
};

// One mask per hierarchy level; requires n <= kDenseCap.
LevelMasks level_masks(const LinearDoc& doc);

// Elementwise OR of the per-level masks.
AttnMask combine(const AttnMask& m_doc, const AttnMask& m_sec, const AttnMask& m_sent);

// Full document mask built sparsely; dense form attached when n <= kDenseCap.
AttnMask doc_mask(const LinearDoc& doc);

// Enumerates the true entries of the combined document mask by walking the
// per-level cliques; never does Theta(n^2) work when s_max << n.
std::vector<Edge> sparse_pairs(const LinearDoc& doc);

// Edge families for tree-shaped masks. Self loops are always included.
struct EdgeToggle {
  bool up = true;       // child-as-query attends parent
  bool down = true;     // parent-as-query attends children
  bool sibling = true;  // same-parent pairs
};

// Mask over an arbitrary-depth rooted tree given parent indices (-1 marks
// the single root). Rejects cycles and multi-root forests.
AttnMask tree_mask(std::span<const std::int32_t> parent, const EdgeToggle& toggles);

// Maximum BFS eccentricity over the directed edge relation.
// Throws DataError("DisconnectedMask...") when some pair is unreachable.
int diameter(const AttnMask& m);

struct MaskStats {
  int n = 0;
  std::int64_t nnz = 0;
  double density = 0.0;
  int row_min = 0;
  int row_max = 0;
};

MaskStats mask_stats(const AttnMask& m);

}  // namespace hierattn::mask
