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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hierattn/encoder.hpp"
#include "hierattn/mask.hpp"

namespace hierattn::listops {

enum class Op : std::int8_t { Min, Max, Med, Sum };  // Sum is modulo 10

// Operator node with 2..5 children; leaves are digits 0..9.
struct Expr {
  bool is_leaf = true;
  int digit = 0;
  Op op = Op::Min;
  std::vector<Expr> kids;
};

// Bottom-up evaluation. MED takes the lower median for even operand counts.
int eval(const Expr& e);

// Model vocabulary: digits 0..9, then [MIN [MAX [MED [SM.
inline constexpr int kVocabSize = 14;
inline constexpr int kNumClasses = 10;

int op_token(Op op);  // 10..13

struct Sample {
  Expr expr;
  std::vector<std::int32_t> tokens;  // operators and digits in expression order
  std::vector<std::int32_t> parent;  // -1 for the root operator
  int label = 0;
};

Sample make_sample(Expr expr);

struct GenConfig {
  int max_depth = 10;
  int min_args = 2;
  int max_args = 5;
  double subexpr_prob = 0.25;
  // Cap on the bracketed token form; longer samples are re-drawn.
  int token_cap = 512;
};

// Seed-deterministic recursive sampling.
Sample generate(std::uint64_t seed, const GenConfig& cfg);

// (tokens, parent) in expression order; each operator anchors its subtree.
std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> to_hierarchy(const Expr& e);

// Attention-edge families over the expression tree:
//   rgb  = up + down + sibling + self
//   gb   = down + sibling + self     (operands do not attend their operator)
//   b    = down + self               (operands do not attend each other)
//   dense = all-true                 (flat baseline)
enum class Variant { Dense, Rgb, Gb, B };

const char* variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

mask::AttnMask variant_mask(const Sample& s, Variant v);

// Text form: "label<TAB>[MAX 2 [MIN 5 6 ] 1 ]" with space-separated tokens.
std::string format_sample(const Sample& s);
Sample parse_sample(std::string_view line);

std::vector<Sample> generate_dataset(std::uint64_t seed, int count, const GenConfig& cfg);
void write_dataset(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(const std::string& path);

// Encoder adapter. Positional encoding (flat single-level index) is attached
// only when cfg.pe_enabled.
template <class S>
encoder::Example<S> make_example(const Sample& s, Variant v, const encoder::ModelConfig& cfg);

// Desk-scale model defaults for this task.
encoder::ModelConfig default_model_config();

struct AblationConfig {
  GenConfig gen;
  int train_n = 20000;
  int val_n = 2000;
  int test_n = 5000;
  std::uint64_t seed = 1;
  encoder::ModelConfig model = default_model_config();
  encoder::TrainConfig tcfg;
  std::vector<Variant> variants = {Variant::Dense, Variant::Rgb, Variant::Gb, Variant::B};
};

struct VariantResult {
  Variant variant;
  double test_acc = 0.0;
  encoder::Trace trace;
};

// Trains one model per variant on identical data, seeds and budgets.
std::vector<VariantResult> run_ablation(const AblationConfig& cfg);

// Reference accuracies of the full-scale (depth-20, 12-layer) configuration.
inline constexpr double kReferenceAccDense = 75.9;
inline constexpr double kReferenceAccRgb = 79.7;
inline constexpr double kReferenceAccGb = 85.6;
inline constexpr double kReferenceAccBlue = 86.2;

double reference_accuracy(Variant v);

}  // namespace hierattn::listops
