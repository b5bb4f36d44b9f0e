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

#include "hierattn/mask.hpp"

#include <algorithm>
#include <deque>
#include <string>
#include <unordered_map>

#include "hierattn/errors.hpp"

namespace hierattn::mask {

namespace {

std::vector<Edge> edges_from_dense(int n, const std::vector<std::uint8_t>& dense) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (dense[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(j)] != 0)
        edges.emplace_back(i, j);
  return edges;  // row-major scan is already sorted
}

std::vector<std::uint8_t> dense_from_edges(int n, const std::vector<Edge>& edges) {
  std::vector<std::uint8_t> dense(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  for (const Edge& e : edges)
    dense[static_cast<std::size_t>(e.first) * static_cast<std::size_t>(n) +
          static_cast<std::size_t>(e.second)] = 1;
  return dense;
}

void check_dense_cap(int n, const char* where) {
  if (n > kDenseCap)
    throw DataError(std::string(where) + ": dense mask construction is capped at n <= " +
                    std::to_string(kDenseCap) + ", got " + std::to_string(n));
}

void append_clique(const std::vector<std::int32_t>& group, std::vector<Edge>& edges) {
  for (std::int32_t a : group)
    for (std::int32_t b : group) edges.emplace_back(a, b);
}

}  // namespace

AttnMask from_dense(int n, std::vector<std::uint8_t> dense) {
  if (static_cast<std::int64_t>(dense.size()) != static_cast<std::int64_t>(n) * n)
    throw DataError("from_dense: size mismatch");
  AttnMask m;
  m.n = n;
  m.edges = edges_from_dense(n, dense);
  m.dense = std::move(dense);
  return m;
}

AttnMask from_edges(int n, std::vector<Edge> edges, bool build_dense) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const Edge& e : edges)
    if (e.first < 0 || e.first >= n || e.second < 0 || e.second >= n)
      throw DataError("from_edges: edge out of range");
  AttnMask m;
  m.n = n;
  if (build_dense) {
    check_dense_cap(n, "from_edges");
    m.dense = dense_from_edges(n, edges);
  }
  m.edges = std::move(edges);
  return m;
}

AttnMask all_true(int n) {
  check_dense_cap(n, "all_true");
  AttnMask m;
  m.n = n;
  m.dense.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 1);
  m.edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.edges.emplace_back(i, j);
  return m;
}

LevelMasks level_masks(const LinearDoc& doc) {
  const int n = doc.n();
  check_dense_cap(n, "level_masks");
  std::vector<std::uint8_t> d_doc(static_cast<std::size_t>(n) * n, 0);
  std::vector<std::uint8_t> d_sec(static_cast<std::size_t>(n) * n, 0);
  std::vector<std::uint8_t> d_sent(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    const HierPos& pi = doc.tokens[static_cast<std::size_t>(i)].pos;
    for (int j = 0; j < n; ++j) {
      const HierPos& pj = doc.tokens[static_cast<std::size_t>(j)].pos;
      const std::size_t idx = static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                              static_cast<std::size_t>(j);
      d_doc[idx] = (pi.sentence == 0 && pj.sentence == 0) ? 1 : 0;
      d_sec[idx] = (pi.token == 0 && pj.token == 0 && pi.section == pj.section) ? 1 : 0;
      d_sent[idx] = (pi.section == pj.section && pi.sentence == pj.sentence) ? 1 : 0;
    }
  }
  return LevelMasks{from_dense(n, std::move(d_doc)), from_dense(n, std::move(d_sec)),
                    from_dense(n, std::move(d_sent))};
}

AttnMask combine(const AttnMask& m_doc, const AttnMask& m_sec, const AttnMask& m_sent) {
  const int n = m_doc.n;
  if (m_sec.n != n || m_sent.n != n) throw DataError("combine: mask shape mismatch");
  if (!m_doc.has_dense() || !m_sec.has_dense() || !m_sent.has_dense())
    throw DataError("combine: dense form required");
  std::vector<std::uint8_t> dense(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  for (std::size_t idx = 0; idx < dense.size(); ++idx)
    dense[idx] = (m_doc.dense[idx] | m_sec.dense[idx] | m_sent.dense[idx]);
  return from_dense(n, std::move(dense));
}

std::vector<Edge> sparse_pairs(const LinearDoc& doc) {
  const int n = doc.n();
  std::vector<Edge> edges;

  // Sentence-level cliques: maximal runs of equal (p1, p2). The linearized
  // order keeps each sentence anchor adjacent to its tokens, and the section
  // and document anchors form singleton runs.
  int run_start = 0;
  for (int i = 1; i <= n; ++i) {
    const bool boundary =
        i == n || doc.tokens[static_cast<std::size_t>(i)].pos.section !=
                      doc.tokens[static_cast<std::size_t>(run_start)].pos.section ||
        doc.tokens[static_cast<std::size_t>(i)].pos.sentence !=
            doc.tokens[static_cast<std::size_t>(run_start)].pos.sentence;
    if (!boundary) continue;
    std::vector<std::int32_t> group;
    group.reserve(static_cast<std::size_t>(i - run_start));
    for (int t = run_start; t < i; ++t) group.push_back(t);
    append_clique(group, edges);
    run_start = i;
  }

  // Section-level cliques: p3 == 0 tokens grouped by p1.
  std::unordered_map<std::int32_t, std::vector<std::int32_t>> sec_groups;
  // Document-level clique: p2 == 0 tokens.
  std::vector<std::int32_t> doc_group;
  for (int i = 0; i < n; ++i) {
    const HierPos& p = doc.tokens[static_cast<std::size_t>(i)].pos;
    if (p.token == 0) sec_groups[p.section].push_back(i);
    if (p.sentence == 0) doc_group.push_back(i);
  }
  for (const auto& [sec, group] : sec_groups) append_clique(group, edges);
  append_clique(doc_group, edges);

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

AttnMask doc_mask(const LinearDoc& doc) {
  return from_edges(doc.n(), sparse_pairs(doc), doc.n() <= kDenseCap);
}

AttnMask tree_mask(std::span<const std::int32_t> parent, const EdgeToggle& toggles) {
  const int n = static_cast<int>(parent.size());
  if (n < 1) throw DataError("tree_mask: empty parent array");
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    if (parent[static_cast<std::size_t>(i)] == -1) {
      ++roots;
      continue;
    }
    if (parent[static_cast<std::size_t>(i)] < 0 || parent[static_cast<std::size_t>(i)] >= n)
      throw DataError("tree_mask: parent index out of range at " + std::to_string(i));
  }
  if (roots != 1)
    throw DataError("tree_mask: expected exactly one root, found " + std::to_string(roots));
  // Cycle check: climbing to the root must terminate within n steps.
  for (int i = 0; i < n; ++i) {
    int cur = i, steps = 0;
    while (parent[static_cast<std::size_t>(cur)] != -1) {
      cur = parent[static_cast<std::size_t>(cur)];
      if (++steps > n) throw DataError("tree_mask: cycle in parent array");
    }
  }

  std::vector<std::vector<std::int32_t>> children(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (parent[static_cast<std::size_t>(i)] != -1)
      children[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    edges.emplace_back(i, i);
    if (toggles.up && parent[static_cast<std::size_t>(i)] != -1)
      edges.emplace_back(i, parent[static_cast<std::size_t>(i)]);
    if (toggles.down)
      for (std::int32_t c : children[static_cast<std::size_t>(i)]) edges.emplace_back(i, c);
    if (toggles.sibling && parent[static_cast<std::size_t>(i)] != -1)
      for (std::int32_t s : children[static_cast<std::size_t>(
               parent[static_cast<std::size_t>(i)])])
        if (s != i) edges.emplace_back(i, s);
  }
  return from_edges(n, std::move(edges), n <= kDenseCap);
}

int diameter(const AttnMask& m) {
  const int n = m.n;
  if (n == 0) throw DataError("diameter: empty mask");
  // CSR adjacency from the sorted edge list.
  std::vector<std::int32_t> row_ptr(static_cast<std::size_t>(n) + 1, 0);
  for (const Edge& e : m.edges) ++row_ptr[static_cast<std::size_t>(e.first) + 1];
  for (int i = 0; i < n; ++i) row_ptr[static_cast<std::size_t>(i) + 1] += row_ptr[static_cast<std::size_t>(i)];

  int max_ecc = 0;
  std::vector<std::int32_t> dist(static_cast<std::size_t>(n));
  std::deque<std::int32_t> queue;
  for (int src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[static_cast<std::size_t>(src)] = 0;
    queue.clear();
    queue.push_back(src);
    int reached = 1, ecc = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (std::int32_t k = row_ptr[static_cast<std::size_t>(u)];
           k < row_ptr[static_cast<std::size_t>(u) + 1]; ++k) {
        const std::int32_t v = m.edges[static_cast<std::size_t>(k)].second;
        if (dist[static_cast<std::size_t>(v)] != -1) continue;
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        ecc = std::max(ecc, dist[static_cast<std::size_t>(v)]);
        ++reached;
        queue.push_back(v);
      }
    }
    if (reached != n)
      throw DataError("DisconnectedMask: node " + std::to_string(src) +
                      " reaches only " + std::to_string(reached) + " of " + std::to_string(n));
    max_ecc = std::max(max_ecc, ecc);
  }
  return max_ecc;
}

MaskStats mask_stats(const AttnMask& m) {
  MaskStats s;
  s.n = m.n;
  s.nnz = m.nnz();
  s.density = m.n == 0 ? 0.0
                       : static_cast<double>(s.nnz) /
                             (static_cast<double>(m.n) * static_cast<double>(m.n));
  std::vector<std::int32_t> per_row(static_cast<std::size_t>(m.n), 0);
  for (const Edge& e : m.edges) ++per_row[static_cast<std::size_t>(e.first)];
  if (m.n > 0) {
    s.row_min = *std::min_element(per_row.begin(), per_row.end());
    s.row_max = *std::max_element(per_row.begin(), per_row.end());
  }
  return s;
}

}  // namespace hierattn::mask
