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

#include <algorithm>
#include <set>

#include "doctest.h"
#include "hierattn/errors.hpp"
#include "hierattn/mask.hpp"
#include "testutil.hpp"

using namespace hierattn;

namespace {

// Parent array of the document tree: tokens point at their sentence anchor,
// sentence anchors at their section anchor, section anchors at the document.
std::vector<std::int32_t> doc_parent_array(const LinearDoc& d) {
  std::vector<std::int32_t> parent(static_cast<std::size_t>(d.n()), -1);
  std::int32_t last_sec = -1, last_sent = -1;
  for (int i = 0; i < d.n(); ++i) {
    switch (d.tokens[static_cast<std::size_t>(i)].kind) {
      case NodeKind::DocAnchor: parent[static_cast<std::size_t>(i)] = -1; break;
      case NodeKind::SecAnchor:
        parent[static_cast<std::size_t>(i)] = 0;
        last_sec = i;
        break;
      case NodeKind::SentAnchor:
        parent[static_cast<std::size_t>(i)] = last_sec;
        last_sent = i;
        break;
      case NodeKind::Regular: parent[static_cast<std::size_t>(i)] = last_sent; break;
    }
  }
  return parent;
}

std::set<int> row_set(const mask::AttnMask& m, int i) {
  std::set<int> out;
  for (int j = 0; j < m.n; ++j)
    if (m.at(i, j)) out.insert(j);
  return out;
}

}  // namespace

TEST_SUITE("mask") {

TEST_CASE("level masks of the five-token document") {
  // [DOC, SEC, SENT, t1, t2]
  const LinearDoc d = linearize(build_tree({{{5, 6}}}));
  const mask::LevelMasks lm = mask::level_masks(d);

  CHECK(row_set(lm.doc, 0) == std::set<int>{0, 1});
  CHECK(row_set(lm.doc, 1) == std::set<int>{0, 1});
  CHECK(row_set(lm.doc, 3).empty());

  CHECK(row_set(lm.sec, 1) == std::set<int>{1, 2});
  CHECK(row_set(lm.sec, 2) == std::set<int>{1, 2});
  CHECK(row_set(lm.sec, 0) == std::set<int>{0});
  CHECK(row_set(lm.sec, 4).empty());

  CHECK(row_set(lm.sent, 2) == std::set<int>{2, 3, 4});
  CHECK(row_set(lm.sent, 3) == std::set<int>{2, 3, 4});
  CHECK(row_set(lm.sent, 4) == std::set<int>{2, 3, 4});
  CHECK(row_set(lm.sent, 0) == std::set<int>{0});
  CHECK(row_set(lm.sent, 1) == std::set<int>{1});

  // diagonal of the sentence mask is always true
  for (int i = 0; i < d.n(); ++i) CHECK(lm.sent.at(i, i));
}

TEST_CASE("combine produces the documented rows") {
  const LinearDoc d = linearize(build_tree({{{5, 6}}}));
  const mask::LevelMasks lm = mask::level_masks(d);
  const mask::AttnMask full = mask::combine(lm.doc, lm.sec, lm.sent);
  CHECK(row_set(full, 0) == std::set<int>{0, 1});
  CHECK(row_set(full, 1) == std::set<int>{0, 1, 2});
  CHECK(row_set(full, 2) == std::set<int>{1, 2, 3, 4});
  CHECK(row_set(full, 3) == std::set<int>{2, 3, 4});
  CHECK(row_set(full, 4) == std::set<int>{2, 3, 4});
  CHECK(full.nnz() == 15);

  // OR with all-false masks is the identity.
  mask::AttnMask empty = mask::from_dense(d.n(), std::vector<std::uint8_t>(25, 0));
  const mask::AttnMask same = mask::combine(full, empty, empty);
  CHECK(same.edges == full.edges);

  mask::AttnMask wrong = mask::all_true(3);
  CHECK_THROWS_AS(mask::combine(full, wrong, empty), DataError);
}

TEST_CASE("document mask is symmetric and matches brute force") {
  rng::Rng gen(3);
  for (int rep = 0; rep < 60; ++rep) {
    const LinearDoc d = linearize(testutil::random_tree(gen));
    const mask::LevelMasks lm = mask::level_masks(d);
    const mask::AttnMask full = mask::combine(lm.doc, lm.sec, lm.sent);
    const std::vector<std::uint8_t> brute = testutil::brute_force_mask(d);
    CHECK(full.dense == brute);
    for (int i = 0; i < d.n(); ++i) {
      CHECK(full.at(i, i));
      for (int j = 0; j < i; ++j) CHECK(full.at(i, j) == full.at(j, i));
    }
  }
}

TEST_CASE("tree_mask on chains and toggles") {
  const std::vector<std::int32_t> chain = {-1, 0, 1};  // root -> a -> b
  const mask::AttnMask down_self = mask::tree_mask(chain, {false, true, false});
  CHECK(row_set(down_self, 0) == std::set<int>{0, 1});
  CHECK(row_set(down_self, 1) == std::set<int>{1, 2});
  CHECK(row_set(down_self, 2) == std::set<int>{2});

  // green+blue drops the parent column from child rows relative to all-on.
  const std::vector<std::int32_t> star = {-1, 0, 0, 0};
  const mask::AttnMask all_on = mask::tree_mask(star, {true, true, true});
  const mask::AttnMask gb = mask::tree_mask(star, {false, true, true});
  for (int i = 1; i < 4; ++i) {
    std::set<int> expect = row_set(all_on, i);
    expect.erase(0);
    CHECK(row_set(gb, i) == expect);
  }

  CHECK_THROWS_AS(mask::tree_mask(std::vector<std::int32_t>{0, -1, 1}, {}), DataError);   // cycle
  CHECK_THROWS_AS(mask::tree_mask(std::vector<std::int32_t>{-1, -1}, {}), DataError);     // two roots
  CHECK_THROWS_AS(mask::tree_mask(std::vector<std::int32_t>{-1, 7}, {}), DataError);      // range
}

TEST_CASE("tree_mask(all-on) over the document tree equals combine(level_masks)") {
  rng::Rng gen(5);
  for (int rep = 0; rep < 60; ++rep) {
    const LinearDoc d = linearize(testutil::random_tree(gen));
    const mask::LevelMasks lm = mask::level_masks(d);
    const mask::AttnMask from_levels = mask::combine(lm.doc, lm.sec, lm.sent);
    const mask::AttnMask from_tree = mask::tree_mask(doc_parent_array(d), {true, true, true});
    CHECK(from_levels.dense == from_tree.dense);
    CHECK(from_levels.edges == from_tree.edges);
  }
}

TEST_CASE("sparse_pairs counts") {
  const LinearDoc five = linearize(build_tree({{{5, 6}}}));
  CHECK(mask::sparse_pairs(five).size() == 15);

  // Smallest document: [DOC, SEC, SENT, t].
  const LinearDoc tiny = linearize(build_tree({{{9}}}));
  const auto tiny_pairs = mask::sparse_pairs(tiny);
  const mask::LevelMasks lm = mask::level_masks(tiny);
  CHECK(tiny_pairs == mask::combine(lm.doc, lm.sec, lm.sent).edges);

  // k sections of one single-token sentence: (k+1)^2 + 6k true entries.
  for (int k : {1, 2, 5, 11}) {
    std::vector<std::vector<std::vector<std::int32_t>>> sections(
        static_cast<std::size_t>(k), {{1}});
    const LinearDoc d = linearize(build_tree(sections));
    const auto pairs = mask::sparse_pairs(d);
    CHECK(static_cast<int>(pairs.size()) == (k + 1) * (k + 1) + 6 * k);
    const mask::LevelMasks klm = mask::level_masks(d);
    CHECK(pairs == mask::combine(klm.doc, klm.sec, klm.sent).edges);
  }
}

TEST_CASE("sparse_pairs equals the dense reference on random documents") {
  rng::Rng gen(31);
  for (int rep = 0; rep < 50; ++rep) {
    const LinearDoc d = linearize(testutil::random_tree(gen));
    const mask::LevelMasks lm = mask::level_masks(d);
    CHECK(mask::sparse_pairs(d) == mask::combine(lm.doc, lm.sec, lm.sent).edges);
  }
}

TEST_CASE("nnz upper bound consistent with O(n s) scaling") {
  rng::Rng gen(37);
  for (int rep = 0; rep < 50; ++rep) {
    const DocTree t = testutil::random_tree(gen, 5, 6, 8);
    const LinearDoc d = linearize(t);
    std::int64_t max_sents = 0;
    for (const auto& sec : t.sections)
      max_sents = std::max<std::int64_t>(max_sents, static_cast<std::int64_t>(sec.size()));
    const std::int64_t bound =
        static_cast<std::int64_t>(d.n()) * (d.s_max + max_sents + d.n_sections + 3);
    CHECK(static_cast<std::int64_t>(mask::sparse_pairs(d).size()) <= bound);
  }
}

TEST_CASE("diameter by document shape") {
  // complete mask
  CHECK(mask::diameter(mask::all_true(4)) == 1);
  // single sentence: token -> SENT -> SEC -> DOC is the longest path
  CHECK(mask::diameter(mask::doc_mask(linearize(build_tree({{{5, 6, 7}}})))) == 3);
  // one section, several sentences: still 3, sentence anchors of one section
  // are directly adjacent through the section-level clique
  CHECK(mask::diameter(mask::doc_mask(linearize(build_tree({{{5}, {6}}})))) == 3);
  // two or more sections: token, SENT, SEC, SEC', SENT', token'
  CHECK(mask::diameter(mask::doc_mask(linearize(build_tree({{{5}}, {{6}}})))) == 5);

  rng::Rng gen(41);
  for (int rep = 0; rep < 25; ++rep) {
    const DocTree t = testutil::random_tree(gen);
    const LinearDoc d = linearize(t);
    const int measured = mask::diameter(mask::doc_mask(d));
    CHECK(measured <= 5);
    const int expected = t.sections.size() >= 2 ? 5 : 3;
    CHECK(measured == expected);
  }

  // blue-only tree masks can be disconnected
  const mask::AttnMask blue = mask::tree_mask(std::vector<std::int32_t>{-1, 0, 0},
                                              {false, true, false});
  CHECK_THROWS_AS(mask::diameter(blue), DataError);
}

TEST_CASE("mask_stats") {
  const mask::MaskStats five = mask::mask_stats(mask::doc_mask(linearize(build_tree({{{5, 6}}}))));
  CHECK(five.n == 5);
  CHECK(five.nnz == 15);
  CHECK(five.density == doctest::Approx(0.6));
  CHECK(five.row_min == 2);
  CHECK(five.row_max == 4);

  const mask::MaskStats complete = mask::mask_stats(mask::all_true(4));
  CHECK(complete.nnz == 16);
  CHECK(complete.density == doctest::Approx(1.0));

  std::vector<mask::Edge> diag;
  for (int i = 0; i < 7; ++i) diag.emplace_back(i, i);
  const mask::MaskStats identity = mask::mask_stats(mask::from_edges(7, diag, true));
  CHECK(identity.nnz == 7);
  CHECK(identity.row_min == 1);
  CHECK(identity.row_max == 1);
}

TEST_CASE("variant edge sets are monotone under toggles") {
  rng::Rng gen(43);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = gen.uniform_int(3, 24);
    std::vector<std::int32_t> parent(static_cast<std::size_t>(n), -1);
    for (int i = 1; i < n; ++i) parent[static_cast<std::size_t>(i)] = gen.uniform_int(0, i - 1);
    const auto blue = mask::tree_mask(parent, {false, true, false}).edges;
    const auto gb = mask::tree_mask(parent, {false, true, true}).edges;
    const auto rgb = mask::tree_mask(parent, {true, true, true}).edges;
    CHECK(std::includes(gb.begin(), gb.end(), blue.begin(), blue.end()));
    CHECK(std::includes(rgb.begin(), rgb.end(), gb.begin(), gb.end()));
  }
}

TEST_CASE("dense construction is capped") {
  std::vector<std::vector<std::int32_t>> sentences(2200, {1});
  const LinearDoc big = linearize(pseudo_sectionize(sentences, 32));  // n = 4470 > cap
  REQUIRE(big.n() > mask::kDenseCap);
  CHECK_THROWS_AS(mask::level_masks(big), DataError);
  const mask::AttnMask sparse_only = mask::doc_mask(big);
  CHECK_FALSE(sparse_only.has_dense());
  CHECK(sparse_only.nnz() > 0);
}

}  // TEST_SUITE
