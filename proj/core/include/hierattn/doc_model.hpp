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
#include <vector>

namespace hierattn {

// Number of index levels per token: section, sentence, token-in-sentence.
// The document level itself carries no index.
inline constexpr int kLevels = 3;

enum class NodeKind : std::uint8_t { DocAnchor, SecAnchor, SentAnchor, Regular };

// Hierarchy level of a token: document anchor 0, section anchor 1,
// sentence anchor 2, regular token 3.
int level_of(NodeKind kind);

// Per-token index vector locating it in the hierarchy. Real elements are
// 1-based; a zero component marks an anchor at or above that level, so the
// document anchor is all-zeros.
struct HierPos {
  std::int32_t section = 0;   // p1
  std::int32_t sentence = 0;  // p2
  std::int32_t token = 0;     // p3

  std::int32_t operator[](int level) const {
    return level == 0 ? section : (level == 1 ? sentence : token);
  }
  bool operator==(const HierPos&) const = default;
};

// Sections -> sentences -> vocabulary token ids. Built through build_tree,
// which rejects empty documents, sections and sentences.
struct DocTree {
  std::vector<std::vector<std::vector<std::int32_t>>> sections;

  std::int64_t sentence_count() const;
  std::int64_t token_count() const;
};

DocTree build_tree(std::vector<std::vector<std::vector<std::int32_t>>> sections);

// Regroups a flat sentence list into pseudo sections of group_size
// consecutive sentences; the last group may be smaller.
DocTree pseudo_sectionize(const std::vector<std::vector<std::int32_t>>& sentences,
                          int group_size);

struct LinearTok {
  std::int32_t id;  // vocabulary id for Regular tokens, -1 for anchors
  NodeKind kind;
  HierPos pos;
};

// Depth-first linearization with anchor tokens: DocAnchor, then per section
// a SecAnchor, then per sentence a SentAnchor followed by its tokens.
struct LinearDoc {
  std::vector<LinearTok> tokens;
  std::int32_t n_sections = 0;
  std::int32_t n_sentences = 0;
  std::int32_t n_regular = 0;
  std::int32_t s_max = 0;  // longest sentence including its anchor

  int n() const { return static_cast<int>(tokens.size()); }
};

LinearDoc linearize(const DocTree& tree);

// Shape parameters for deterministic synthetic documents (inclusive ranges).
struct SynthShape {
  int min_tokens_per_sentence = 8;
  int max_tokens_per_sentence = 16;
  int min_sentences_per_section = 8;
  int max_sentences_per_section = 16;
  std::int32_t vocab = 1000;
};

// Whole sections are appended until the linearized length reaches target_n.
LinearDoc make_synthetic_doc(std::uint64_t seed, int target_n, const SynthShape& shape);

}  // namespace hierattn
