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

#include "hierattn/doc_model.hpp"

#include <string>
#include <utility>

#include "hierattn/errors.hpp"
#include "hierattn/rng.hpp"

namespace hierattn {

int level_of(NodeKind kind) {
  switch (kind) {
    case NodeKind::DocAnchor: return 0;
    case NodeKind::SecAnchor: return 1;
    case NodeKind::SentAnchor: return 2;
    case NodeKind::Regular: return 3;
  }
  throw DataError("level_of: invalid NodeKind");
}

std::int64_t DocTree::sentence_count() const {
  std::int64_t count = 0;
  for (const auto& section : sections) count += static_cast<std::int64_t>(section.size());
  return count;
}

std::int64_t DocTree::token_count() const {
  std::int64_t count = 0;
  for (const auto& section : sections)
    for (const auto& sentence : section) count += static_cast<std::int64_t>(sentence.size());
  return count;
}

DocTree build_tree(std::vector<std::vector<std::vector<std::int32_t>>> sections) {
  if (sections.empty()) throw DataError("EmptyDocument: document has no sections");
  for (std::size_t s = 0; s < sections.size(); ++s) {
    if (sections[s].empty())
      throw DataError("EmptySection: sections[" + std::to_string(s) + "] has no sentences");
    for (std::size_t j = 0; j < sections[s].size(); ++j) {
      if (sections[s][j].empty())
        throw DataError("EmptySentence: sections[" + std::to_string(s) + "].sentences[" +
                        std::to_string(j) + "] has no tokens");
      for (std::size_t t = 0; t < sections[s][j].size(); ++t) {
        if (sections[s][j][t] < 0)
          throw DataError("NegativeTokenId: sections[" + std::to_string(s) + "].sentences[" +
                          std::to_string(j) + "].tokens[" + std::to_string(t) + "]");
      }
    }
  }
  return DocTree{std::move(sections)};
}

DocTree pseudo_sectionize(const std::vector<std::vector<std::int32_t>>& sentences,
                          int group_size) {
  if (group_size < 1) throw DataError("pseudo_sectionize: group_size must be >= 1");
  if (sentences.empty()) throw DataError("EmptyDocument: no sentences");
  std::vector<std::vector<std::vector<std::int32_t>>> sections;
  for (std::size_t i = 0; i < sentences.size(); i += static_cast<std::size_t>(group_size)) {
    const std::size_t end = std::min(sentences.size(), i + static_cast<std::size_t>(group_size));
    sections.emplace_back(sentences.begin() + static_cast<std::ptrdiff_t>(i),
                          sentences.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return build_tree(std::move(sections));
}

LinearDoc linearize(const DocTree& tree) {
  if (tree.sections.empty()) throw DataError("EmptyDocument: document has no sections");
  LinearDoc out;
  out.tokens.reserve(static_cast<std::size_t>(1 + tree.sections.size() + tree.sentence_count() +
                                              tree.token_count()));
  out.tokens.push_back({-1, NodeKind::DocAnchor, HierPos{0, 0, 0}});
  std::int32_t k = 0;
  for (const auto& section : tree.sections) {
    ++k;
    out.tokens.push_back({-1, NodeKind::SecAnchor, HierPos{k, 0, 0}});
    std::int32_t j = 0;
    for (const auto& sentence : section) {
      ++j;
      out.tokens.push_back({-1, NodeKind::SentAnchor, HierPos{k, j, 0}});
      out.s_max = std::max<std::int32_t>(out.s_max, static_cast<std::int32_t>(sentence.size()) + 1);
      std::int32_t t = 0;
      for (std::int32_t id : sentence) {
        ++t;
        out.tokens.push_back({id, NodeKind::Regular, HierPos{k, j, t}});
      }
      out.n_regular += static_cast<std::int32_t>(sentence.size());
    }
    out.n_sentences += j;
  }
  out.n_sections = k;
  return out;
}

LinearDoc make_synthetic_doc(std::uint64_t seed, int target_n, const SynthShape& shape) {
  if (target_n < 1) throw DataError("make_synthetic_doc: target_n must be >= 1");
  rng::Rng gen(seed);
  std::vector<std::vector<std::vector<std::int32_t>>> sections;
  int n_total = 1;  // document anchor
  do {
    const int n_sent = gen.uniform_int(shape.min_sentences_per_section,
                                       shape.max_sentences_per_section);
    std::vector<std::vector<std::int32_t>> section;
    section.reserve(static_cast<std::size_t>(n_sent));
    n_total += 1;  // section anchor
    for (int j = 0; j < n_sent; ++j) {
      const int len = gen.uniform_int(shape.min_tokens_per_sentence,
                                      shape.max_tokens_per_sentence);
      std::vector<std::int32_t> sentence(static_cast<std::size_t>(len));
      for (auto& id : sentence) id = gen.uniform_int(0, shape.vocab - 1);
      n_total += 1 + len;
      section.push_back(std::move(sentence));
    }
    sections.push_back(std::move(section));
  } while (n_total < target_n);
  return linearize(build_tree(std::move(sections)));
}

}  // namespace hierattn
