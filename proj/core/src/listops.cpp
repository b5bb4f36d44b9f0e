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

#include "hierattn/listops.hpp"

#include <algorithm>
#include <fstream>

#include "hierattn/errors.hpp"
#include "hierattn/hpe.hpp"
#include "hierattn/rng.hpp"

namespace hierattn::listops {

int eval(const Expr& e) {
  if (e.is_leaf) return e.digit;
  std::vector<int> vals;
  vals.reserve(e.kids.size());
  for (const Expr& kid : e.kids) vals.push_back(eval(kid));
  switch (e.op) {
    case Op::Min: return *std::min_element(vals.begin(), vals.end());
    case Op::Max: return *std::max_element(vals.begin(), vals.end());
    case Op::Med: {
      std::sort(vals.begin(), vals.end());
      return vals[(vals.size() - 1) / 2];  // lower median for even counts
    }
    case Op::Sum: {
      int s = 0;
      for (int v : vals) s += v;
      return s % 10;
    }
  }
  throw DataError("eval: invalid operator");
}

int op_token(Op op) { return 10 + static_cast<int>(op); }

namespace {

const char* op_text(Op op) {
  switch (op) {
    case Op::Min: return "[MIN";
    case Op::Max: return "[MAX";
    case Op::Med: return "[MED";
    case Op::Sum: return "[SM";
  }
  throw DataError("op_text: invalid operator");
}

std::optional<Op> parse_op(std::string_view tok) {
  if (tok == "[MIN") return Op::Min;
  if (tok == "[MAX") return Op::Max;
  if (tok == "[MED") return Op::Med;
  if (tok == "[SM") return Op::Sum;
  return std::nullopt;
}

void hierarchy_walk(const Expr& e, std::int32_t parent_idx,
                    std::vector<std::int32_t>& tokens, std::vector<std::int32_t>& parents) {
  const std::int32_t self = static_cast<std::int32_t>(tokens.size());
  if (e.is_leaf) {
    tokens.push_back(e.digit);
    parents.push_back(parent_idx);
    return;
  }
  tokens.push_back(op_token(e.op));
  parents.push_back(parent_idx);
  for (const Expr& kid : e.kids) hierarchy_walk(kid, self, tokens, parents);
}

// Bracketed token count: one opener per operator, one closer per operator,
// one token per digit.
int bracketed_length(const Expr& e) {
  if (e.is_leaf) return 1;
  int len = 2;
  for (const Expr& kid : e.kids) len += bracketed_length(kid);
  return len;
}

Expr random_expr(rng::Rng& gen, const GenConfig& cfg, int depth) {
  Expr e;
  e.is_leaf = false;
  e.op = static_cast<Op>(gen.uniform_int(0, 3));
  const int n_args = gen.uniform_int(cfg.min_args, cfg.max_args);
  e.kids.reserve(static_cast<std::size_t>(n_args));
  for (int a = 0; a < n_args; ++a) {
    if (depth < cfg.max_depth && gen.uniform() < cfg.subexpr_prob) {
      e.kids.push_back(random_expr(gen, cfg, depth + 1));
    } else {
      Expr leaf;
      leaf.is_leaf = true;
      leaf.digit = gen.uniform_int(0, 9);
      e.kids.push_back(std::move(leaf));
    }
  }
  return e;
}

void format_expr(const Expr& e, std::string& out) {
  if (e.is_leaf) {
    out += static_cast<char>('0' + e.digit);
    return;
  }
  out += op_text(e.op);
  for (const Expr& kid : e.kids) {
    out += ' ';
    format_expr(kid, out);
  }
  out += " ]";
}

Expr parse_expr(const std::vector<std::string_view>& toks, std::size_t& pos);

Expr parse_node(const std::vector<std::string_view>& toks, std::size_t& pos) {
  if (pos >= toks.size()) throw DataError("parse: unexpected end of tokens");
  const std::string_view tok = toks[pos];
  if (tok.size() == 1 && tok[0] >= '0' && tok[0] <= '9') {
    ++pos;
    Expr leaf;
    leaf.is_leaf = true;
    leaf.digit = tok[0] - '0';
    return leaf;
  }
  return parse_expr(toks, pos);
}

Expr parse_expr(const std::vector<std::string_view>& toks, std::size_t& pos) {
  const auto op = parse_op(toks[pos]);
  if (!op)
    throw DataError("parse: expected operator at token " + std::to_string(pos) + ", got '" +
                    std::string(toks[pos]) + "'");
  ++pos;
  Expr e;
  e.is_leaf = false;
  e.op = *op;
  while (true) {
    if (pos >= toks.size()) throw DataError("parse: missing closing bracket");
    if (toks[pos] == "]") {
      ++pos;
      break;
    }
    e.kids.push_back(parse_node(toks, pos));
  }
  if (e.kids.empty()) throw DataError("parse: operator with no operands");
  return e;
}

}  // namespace

Sample make_sample(Expr expr) {
  Sample s;
  s.label = eval(expr);
  auto [tokens, parents] = to_hierarchy(expr);
  s.tokens = std::move(tokens);
  s.parent = std::move(parents);
  s.expr = std::move(expr);
  return s;
}

Sample generate(std::uint64_t seed, const GenConfig& cfg) {
  if (cfg.max_depth < 1) throw DataError("generate: max_depth must be >= 1");
  if (cfg.min_args < 2 || cfg.max_args < cfg.min_args)
    throw DataError("generate: operand counts must satisfy 2 <= min_args <= max_args");
  for (std::uint64_t attempt = 0;; ++attempt) {
    rng::Rng gen(rng::derive(seed, "listops", attempt));
    Expr e = random_expr(gen, cfg, 1);
    if (bracketed_length(e) <= cfg.token_cap) return make_sample(std::move(e));
  }
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> to_hierarchy(const Expr& e) {
  std::vector<std::int32_t> tokens, parents;
  hierarchy_walk(e, -1, tokens, parents);
  return {std::move(tokens), std::move(parents)};
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Dense: return "dense";
    case Variant::Rgb: return "rgb";
    case Variant::Gb: return "gb";
    case Variant::B: return "b";
  }
  throw DataError("variant_name: invalid variant");
}

std::optional<Variant> parse_variant(std::string_view name) {
  if (name == "dense") return Variant::Dense;
  if (name == "rgb") return Variant::Rgb;
  if (name == "gb") return Variant::Gb;
  if (name == "b" || name == "blue") return Variant::B;
  return std::nullopt;
}

mask::AttnMask variant_mask(const Sample& s, Variant v) {
  const int n = static_cast<int>(s.tokens.size());
  switch (v) {
    case Variant::Dense: return mask::all_true(n);
    case Variant::Rgb: return mask::tree_mask(s.parent, {true, true, true});
    case Variant::Gb: return mask::tree_mask(s.parent, {false, true, true});
    case Variant::B: return mask::tree_mask(s.parent, {false, true, false});
  }
  throw DataError("variant_mask: invalid variant");
}

std::string format_sample(const Sample& s) {
  std::string out = std::to_string(s.label);
  out += '\t';
  format_expr(s.expr, out);
  return out;
}

Sample parse_sample(std::string_view line) {
  const std::size_t tab = line.find('\t');
  if (tab == std::string_view::npos) throw DataError("parse_sample: missing label field");
  int label = 0;
  try {
    label = std::stoi(std::string(line.substr(0, tab)));
  } catch (const std::exception&) {
    throw DataError("parse_sample: bad label '" + std::string(line.substr(0, tab)) + "'");
  }
  if (label < 0 || label > 9) throw DataError("parse_sample: label out of range");

  std::vector<std::string_view> toks;
  std::string_view rest = line.substr(tab + 1);
  std::size_t i = 0;
  while (i < rest.size()) {
    while (i < rest.size() && rest[i] == ' ') ++i;
    std::size_t j = i;
    while (j < rest.size() && rest[j] != ' ') ++j;
    if (j > i) toks.push_back(rest.substr(i, j - i));
    i = j;
  }
  if (toks.empty()) throw DataError("parse_sample: empty expression");
  std::size_t pos = 0;
  Expr e = parse_expr(toks, pos);
  if (pos != toks.size()) throw DataError("parse_sample: trailing tokens after expression");
  Sample s = make_sample(std::move(e));
  s.label = label;
  return s;
}

std::vector<Sample> generate_dataset(std::uint64_t seed, int count, const GenConfig& cfg) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(generate(rng::derive(seed, "sample", static_cast<std::uint64_t>(i)), cfg));
  return out;
}

void write_dataset(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw DataError("write_dataset: cannot open " + path);
  for (const Sample& s : samples) out << format_sample(s) << '\n';
  if (!out) throw DataError("write_dataset: write failure on " + path);
}

std::vector<Sample> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_dataset: cannot open " + path);
  std::vector<Sample> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_sample(line));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("read_dataset: no samples in " + path);
  return out;
}

template <class S>
encoder::Example<S> make_example(const Sample& s, Variant v, const encoder::ModelConfig& cfg) {
  encoder::Example<S> ex;
  ex.label = s.label;
  ex.input.rows = s.tokens;
  ex.input.attn = variant_mask(s, v);
  if (cfg.pe_enabled) {
    const int n = static_cast<int>(s.tokens.size());
    const hpe::EncodingConfig pe_cfg{cfg.d_model, 1};
    ex.input.pos_enc.resize(n, cfg.d_model);
    for (int i = 0; i < n; ++i) {
      const std::int32_t flat[1] = {i};
      const std::vector<double> row = hpe::encode_position({flat, 1}, pe_cfg);
      for (int c = 0; c < cfg.d_model; ++c)
        ex.input.pos_enc(i, c) = static_cast<S>(row[static_cast<std::size_t>(c)]);
    }
  }
  return ex;
}

encoder::ModelConfig default_model_config() {
  encoder::ModelConfig cfg;
  cfg.n_layers = 4;
  cfg.d_model = 64;
  cfg.heads = 4;
  cfg.d_ff = 256;
  cfg.vocab_size = kVocabSize;
  cfg.n_classes = kNumClasses;
  cfg.pe_enabled = false;
  return cfg;
}

double reference_accuracy(Variant v) {
  switch (v) {
    case Variant::Dense: return kReferenceAccDense;
    case Variant::Rgb: return kReferenceAccRgb;
    case Variant::Gb: return kReferenceAccGb;
    case Variant::B: return kReferenceAccBlue;
  }
  throw DataError("reference_accuracy: invalid variant");
}

std::vector<VariantResult> run_ablation(const AblationConfig& cfg) {
  const std::vector<Sample> train_samples =
      generate_dataset(rng::derive(cfg.seed, "train"), cfg.train_n, cfg.gen);
  const std::vector<Sample> val_samples =
      generate_dataset(rng::derive(cfg.seed, "val"), cfg.val_n, cfg.gen);
  const std::vector<Sample> test_samples =
      generate_dataset(rng::derive(cfg.seed, "test"), cfg.test_n, cfg.gen);

  std::vector<VariantResult> results;
  for (Variant v : cfg.variants) {
    std::vector<encoder::Example<double>> train_set, val_set, test_set;
    train_set.reserve(train_samples.size());
    for (const Sample& s : train_samples) train_set.push_back(make_example<double>(s, v, cfg.model));
    val_set.reserve(val_samples.size());
    for (const Sample& s : val_samples) val_set.push_back(make_example<double>(s, v, cfg.model));
    test_set.reserve(test_samples.size());
    for (const Sample& s : test_samples) test_set.push_back(make_example<double>(s, v, cfg.model));

    // Identical trunk and budget for every variant: same init seed, same
    // optimizer schedule, same data order.
    auto params = encoder::init_params<double>(cfg.model, rng::derive(cfg.seed, "init"));
    VariantResult res;
    res.variant = v;
    res.trace = encoder::train(params, cfg.model, cfg.tcfg, train_set, val_set);
    res.test_acc = encoder::evaluate(params, cfg.model, test_set);
    results.push_back(std::move(res));
  }
  return results;
}

template encoder::Example<float> make_example<float>(const Sample&, Variant,
                                                     const encoder::ModelConfig&);
template encoder::Example<double> make_example<double>(const Sample&, Variant,
                                                       const encoder::ModelConfig&);

}  // namespace hierattn::listops
