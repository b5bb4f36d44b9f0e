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

#include "hierattn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hierattn/errors.hpp"

namespace hierattn::engine {

namespace {

template <class S>
void check_finite(const Mat<S>& m, const char* name) {
  if (!m.allFinite()) throw NumericError(std::string(name) + ": non-finite entries");
}

}  // namespace

template <class S>
AttentionInput<S> make_attention_input(Mat<S> q, Mat<S> k, Mat<S> v) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols())
    throw DataError("AttentionInput: Q, K, V must share n and d_k");
  if (q.rows() < 1 || q.cols() < 1) throw DataError("AttentionInput: empty input");
  check_finite(q, "Q");
  check_finite(k, "K");
  check_finite(v, "V");
  AttentionInput<S> in;
  in.scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(q.cols())));
  in.q = std::move(q);
  in.k = std::move(k);
  in.v = std::move(v);
  return in;
}

template <class S>
AttentionInput<S> random_attention_input(int n, int d_k, rng::Rng& gen) {
  Mat<S> q(n, d_k), k(n, d_k), v(n, d_k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d_k; ++j) {
      q(i, j) = static_cast<S>(gen.normal());
      k(i, j) = static_cast<S>(gen.normal());
      v(i, j) = static_cast<S>(gen.normal());
    }
  return make_attention_input<S>(std::move(q), std::move(k), std::move(v));
}

template <class S>
Mat<S> dense_attention(const AttentionInput<S>& in) {
  check_finite(in.q, "Q");
  check_finite(in.k, "K");
  check_finite(in.v, "V");
  Mat<S> a = in.q * in.k.transpose() * in.scale;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const S row_max = a.row(i).maxCoeff();
    a.row(i) = (a.row(i).array() - row_max).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a * in.v;
}

template <class S>
Mat<S> dense_masked_attention(const AttentionInput<S>& in, const mask::AttnMask& m) {
  const int n = static_cast<int>(in.q.rows());
  if (m.n != n) throw DataError("dense_masked_attention: mask size mismatch");
  if (!m.has_dense()) throw DataError("dense_masked_attention: dense mask form required");
  check_finite(in.q, "Q");
  check_finite(in.k, "K");
  check_finite(in.v, "V");

  Mat<S> a = in.q * in.k.transpose() * in.scale;
  for (int i = 0; i < n; ++i) {
    S row_max = -std::numeric_limits<S>::infinity();
    for (int j = 0; j < n; ++j)
      if (m.at(i, j)) row_max = std::max(row_max, a(i, j));
    if (row_max == -std::numeric_limits<S>::infinity())
      throw NumericError("EmptyRow: query " + std::to_string(i) + " has no unmasked key");
    S sum = S(0);
    for (int j = 0; j < n; ++j) {
      const S w = m.at(i, j) ? std::exp(a(i, j) - row_max) : S(0);
      a(i, j) = w;
      sum += w;
    }
    a.row(i) /= sum;
  }
  return a * in.v;
}

LevelPermutation identity_permutation(int n) {
  LevelPermutation p;
  p.perm.resize(static_cast<std::size_t>(n));
  p.inverse.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    p.perm[static_cast<std::size_t>(i)] = i;
    p.inverse[static_cast<std::size_t>(i)] = i;
  }
  return p;
}

LevelPermutation sort_kv(const LinearDoc& doc) {
  const int n = doc.n();
  LevelPermutation p = identity_permutation(n);
  std::stable_sort(p.perm.begin(), p.perm.end(), [&doc](std::int32_t a, std::int32_t b) {
    return level_of(doc.tokens[static_cast<std::size_t>(a)].kind) <
           level_of(doc.tokens[static_cast<std::size_t>(b)].kind);
  });
  for (int i = 0; i < n; ++i) p.inverse[static_cast<std::size_t>(p.perm[static_cast<std::size_t>(i)])] = i;
  return p;
}

long BlockGrid::nonempty_count() const {
  long count = 0;
  for (std::uint8_t f : nonempty) count += f;
  return count;
}

double BlockGrid::skip_ratio() const {
  return total() == 0 ? 0.0 : 1.0 - static_cast<double>(nonempty_count()) / static_cast<double>(total());
}

BlockGrid build_block_grid(const LinearDoc& doc, const LevelPermutation& perm, int b_q, int b_k) {
  if (b_q < 1 || b_k < 1) throw DataError("build_block_grid: block sizes must be >= 1");
  const int n = doc.n();
  if (static_cast<int>(perm.perm.size()) != n)
    throw DataError("build_block_grid: permutation size mismatch");
  BlockGrid g;
  g.b_q = b_q;
  g.b_k = b_k;
  g.t_r = (n + b_q - 1) / b_q;
  g.t_c = (n + b_k - 1) / b_k;
  g.nonempty.assign(static_cast<std::size_t>(g.t_r) * static_cast<std::size_t>(g.t_c), 0);
  for (const mask::Edge& e : mask::sparse_pairs(doc)) {
    const int ti = e.first / b_q;
    const int tj = perm.inverse[static_cast<std::size_t>(e.second)] / b_k;
    g.nonempty[static_cast<std::size_t>(ti) * static_cast<std::size_t>(g.t_c) +
               static_cast<std::size_t>(tj)] = 1;
  }
  return g;
}

template <class S>
Mat<S> tiled_forward_with_permutation(const AttentionInput<S>& in, const LinearDoc& doc,
                                      const LevelPermutation& perm, int b_q, int b_k) {
  const int n = static_cast<int>(in.q.rows());
  const int d = static_cast<int>(in.q.cols());
  if (doc.n() != n) throw DataError("tiled_forward: document length does not match n");
  if (b_q < 1 || b_k < 1) throw DataError("tiled_forward: block sizes must be >= 1");
  const S neg_inf = -std::numeric_limits<S>::infinity();

  const BlockGrid grid = build_block_grid(doc, perm, b_q, b_k);

  // Keys/values in permuted order.
  Mat<S> ks(n, d), vs(n, d);
  for (int a = 0; a < n; ++a) {
    ks.row(a) = in.k.row(perm.perm[static_cast<std::size_t>(a)]);
    vs.row(a) = in.v.row(perm.perm[static_cast<std::size_t>(a)]);
  }

  Mat<S> out = Mat<S>::Zero(n, d);
  std::vector<S> run_max(static_cast<std::size_t>(n), neg_inf);
  std::vector<S> run_norm(static_cast<std::size_t>(n), S(0));

  Mat<S> sblk;
  for (int ti = 0; ti < grid.t_r; ++ti) {
    const int r0 = ti * b_q;
    const int rows = std::min(n, r0 + b_q) - r0;
    for (int tj = 0; tj < grid.t_c; ++tj) {
      if (!grid.tile(ti, tj)) continue;  // provably all-masked
      const int c0 = tj * b_k;
      const int cols = std::min(n, c0 + b_k) - c0;

      sblk.noalias() = in.q.middleRows(r0, rows) * ks.middleRows(c0, cols).transpose();
      sblk *= in.scale;
      // Mask recomputed on chip from hierarchy positions.
      for (int r = 0; r < rows; ++r) {
        const HierPos& pq = doc.tokens[static_cast<std::size_t>(r0 + r)].pos;
        for (int c = 0; c < cols; ++c) {
          const HierPos& pk =
              doc.tokens[static_cast<std::size_t>(perm.perm[static_cast<std::size_t>(c0 + c)])].pos;
          if (!mask::pair_allowed(pq, pk)) sblk(r, c) = neg_inf;
        }
      }

      for (int r = 0; r < rows; ++r) {
        const int i = r0 + r;
        const S tile_max = sblk.row(r).head(cols).maxCoeff();
        if (tile_max == neg_inf) continue;  // row fully masked within this tile
        Eigen::Matrix<S, 1, Eigen::Dynamic> p =
            (sblk.row(r).head(cols).array() - tile_max).exp();
        const S tile_norm = p.sum();
        Eigen::Matrix<S, 1, Eigen::Dynamic> pv = p * vs.middleRows(c0, cols);

        if (run_norm[static_cast<std::size_t>(i)] == S(0)) {
          // First unmasked contribution for this row.
          run_max[static_cast<std::size_t>(i)] = tile_max;
          run_norm[static_cast<std::size_t>(i)] = tile_norm;
          out.row(i) = pv / tile_norm;
        } else {
          const S m_old = run_max[static_cast<std::size_t>(i)];
          const S m_new = std::max(m_old, tile_max);
          const S w_old = std::exp(m_old - m_new);
          const S w_new = std::exp(tile_max - m_new);
          const S l_new = w_old * run_norm[static_cast<std::size_t>(i)] + w_new * tile_norm;
          out.row(i) = (run_norm[static_cast<std::size_t>(i)] * w_old * out.row(i) + w_new * pv) / l_new;
          run_max[static_cast<std::size_t>(i)] = m_new;
          run_norm[static_cast<std::size_t>(i)] = l_new;
        }
      }
    }
  }

  for (int i = 0; i < n; ++i)
    if (run_norm[static_cast<std::size_t>(i)] == S(0))
      throw NumericError("EmptyRow: query " + std::to_string(i) + " has no unmasked key");
  return out;
}

template <class S>
Mat<S> tiled_forward(const AttentionInput<S>& in, const LinearDoc& doc, int b_q, int b_k) {
  return tiled_forward_with_permutation(in, doc, sort_kv(doc), b_q, b_k);
}

SkipReport skip_report(const LinearDoc& doc, int b_q, int b_k, int d_k) {
  SkipReport r;
  const BlockGrid sorted = build_block_grid(doc, sort_kv(doc), b_q, b_k);
  const BlockGrid unsorted = build_block_grid(doc, identity_permutation(doc.n()), b_q, b_k);
  r.total_blocks = sorted.total();
  r.nonempty_sorted = sorted.nonempty_count();
  r.nonempty_unsorted = unsorted.nonempty_count();
  r.skip_ratio_sorted = sorted.skip_ratio();
  r.skip_ratio_unsorted = unsorted.skip_ratio();
  r.flops_proxy = static_cast<double>(r.nonempty_sorted) * b_q * b_k * d_k;
  return r;
}

long fixed_window_tile_count(int n, int window, int b_q, int b_k) {
  if (n < 1 || window < 0 || b_q < 1 || b_k < 1)
    throw DataError("fixed_window_tile_count: invalid arguments");
  const int half = window / 2;
  const int t_r = (n + b_q - 1) / b_q;
  long count = 0;
  for (int ti = 0; ti < t_r; ++ti) {
    const int r0 = ti * b_q;
    const int r1 = std::min(n, r0 + b_q) - 1;
    const int c_lo = std::max(0, r0 - half);
    const int c_hi = std::min(n - 1, r1 + half);
    count += c_hi / b_k - c_lo / b_k + 1;
  }
  return count;
}

template <class S>
Mat<S> multi_head_attention(const Mat<S>& x, const MhaParams<S>& p, int heads,
                            const LinearDoc& doc, int b_q, int b_k) {
  const int d_model = static_cast<int>(x.cols());
  if (heads < 1 || d_model % heads != 0)
    throw DataError("multi_head_attention: d_model must be divisible by heads");
  if (p.wq.rows() != d_model || p.wq.cols() != d_model || p.wk.rows() != d_model ||
      p.wv.rows() != d_model || p.wo.rows() != d_model)
    throw DataError("multi_head_attention: projection shape mismatch");
  const int d_k = d_model / heads;
  const Mat<S> q = x * p.wq, k = x * p.wk, v = x * p.wv;
  Mat<S> cat(x.rows(), d_model);
  for (int h = 0; h < heads; ++h) {
    AttentionInput<S> in;
    in.q = q.middleCols(h * d_k, d_k);
    in.k = k.middleCols(h * d_k, d_k);
    in.v = v.middleCols(h * d_k, d_k);
    in.scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_k)));
    cat.middleCols(h * d_k, d_k) = tiled_forward(in, doc, b_q, b_k);
  }
  return cat * p.wo;
}

template <class S>
Mat<S> multi_head_attention(const Mat<S>& x, const MhaParams<S>& p, int heads,
                            const mask::AttnMask& m) {
  const int d_model = static_cast<int>(x.cols());
  if (heads < 1 || d_model % heads != 0)
    throw DataError("multi_head_attention: d_model must be divisible by heads");
  if (p.wq.rows() != d_model || p.wq.cols() != d_model || p.wk.rows() != d_model ||
      p.wv.rows() != d_model || p.wo.rows() != d_model)
    throw DataError("multi_head_attention: projection shape mismatch");
  const int d_k = d_model / heads;
  const Mat<S> q = x * p.wq, k = x * p.wk, v = x * p.wv;
  Mat<S> cat(x.rows(), d_model);
  for (int h = 0; h < heads; ++h) {
    AttentionInput<S> in;
    in.q = q.middleCols(h * d_k, d_k);
    in.k = k.middleCols(h * d_k, d_k);
    in.v = v.middleCols(h * d_k, d_k);
    in.scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_k)));
    cat.middleCols(h * d_k, d_k) = dense_masked_attention(in, m);
  }
  return cat * p.wo;
}

#define HIERATTN_INSTANTIATE_ENGINE(S)                                                       \
  template AttentionInput<S> make_attention_input<S>(Mat<S>, Mat<S>, Mat<S>);                \
  template AttentionInput<S> random_attention_input<S>(int, int, rng::Rng&);                 \
  template Mat<S> dense_attention<S>(const AttentionInput<S>&);                              \
  template Mat<S> dense_masked_attention<S>(const AttentionInput<S>&, const mask::AttnMask&);\
  template Mat<S> tiled_forward_with_permutation<S>(const AttentionInput<S>&,                \
                                                    const LinearDoc&, const LevelPermutation&,\
                                                    int, int);                               \
  template Mat<S> tiled_forward<S>(const AttentionInput<S>&, const LinearDoc&, int, int);    \
  template Mat<S> multi_head_attention<S>(const Mat<S>&, const MhaParams<S>&, int,           \
                                          const LinearDoc&, int, int);                       \
  template Mat<S> multi_head_attention<S>(const Mat<S>&, const MhaParams<S>&, int,           \
                                          const mask::AttnMask&);

HIERATTN_INSTANTIATE_ENGINE(float)
HIERATTN_INSTANTIATE_ENGINE(double)

#undef HIERATTN_INSTANTIATE_ENGINE

}  // namespace hierattn::engine
