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

// Command-line harness: dataset generation, mask/block statistics, attention
// benchmarking, training, evaluation and the attention-variant ablation.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hierattn/doc_model.hpp"
#include "hierattn/encoder.hpp"
#include "hierattn/engine.hpp"
#include "hierattn/errors.hpp"
#include "hierattn/io.hpp"
#include "hierattn/listops.hpp"
#include "hierattn/mask.hpp"
#include "hierattn/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using hierattn::DataError;
using hierattn::NumericError;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 1;
  int fp = 64;
  std::string out;
  std::string format;  // json or csv; empty picks the subcommand default
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file " + path);
  out << text;
  if (!out) throw DataError("write failure on " + path);
}

// Every run records the resolved configuration, input content hashes and the
// produced files. Nothing time-dependent goes in, so reruns are byte-equal.
void write_manifest(const std::string& path, const std::string& subcommand,
                    const GlobalOpts& g, ordered_json config,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  ordered_json m;
  m["tool"] = "hierattn";
  m["subcommand"] = subcommand;
  m["seed"] = g.seed;
  m["fp"] = g.fp;
  m["config"] = std::move(config);
  ordered_json in_json = ordered_json::object();
  for (const auto& [file, hash] : inputs) in_json[file] = hash;
  m["inputs"] = in_json;
  m["outputs"] = outputs;
  write_text_file(path, m.dump(2) + "\n");
}

std::string require_out(const GlobalOpts& g) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
  return g.out;
}

// ---------------------------------------------------------------------------
// gen-listops

struct GenListopsOpts {
  int train = 100, val = 10, test = 10;
  int depth = 10, min_args = 2, max_args = 5, cap = 512;
  double p_sub = 0.25;
};

void run_gen_listops(const GlobalOpts& g, const GenListopsOpts& o) {
  const fs::path dir = require_out(g);
  fs::create_directories(dir);
  hierattn::listops::GenConfig cfg{o.depth, o.min_args, o.max_args, o.p_sub, o.cap};
  const struct {
    const char* name;
    int count;
  } splits[] = {{"train", o.train}, {"val", o.val}, {"test", o.test}};
  std::vector<std::string> outputs;
  for (const auto& split : splits) {
    const auto samples = hierattn::listops::generate_dataset(
        hierattn::rng::derive(g.seed, split.name), split.count, cfg);
    const std::string path = (dir / (std::string(split.name) + ".tsv")).string();
    hierattn::listops::write_dataset(path, samples);
    outputs.push_back(path);
  }
  write_manifest((dir / "manifest.json").string(), "gen-listops", g,
                 ordered_json{{"train", o.train},
                              {"val", o.val},
                              {"test", o.test},
                              {"depth", o.depth},
                              {"min_args", o.min_args},
                              {"max_args", o.max_args},
                              {"p_sub", o.p_sub},
                              {"cap", o.cap}},
                 {}, outputs);
  std::cout << "wrote " << outputs.size() << " dataset files to " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// mask-stats

struct MaskStatsOpts {
  std::string docs;
};

void run_mask_stats(const GlobalOpts& g, const MaskStatsOpts& o) {
  const std::string out_path = require_out(g);
  const auto docs = hierattn::io::read_documents(o.docs);
  const bool csv = g.format == "csv";
  std::string text;
  if (csv) text += "n,nnz,density,diameter,s_max\n";
  double density_sum = 0.0;
  long diameter_sum = 0;
  std::int64_t nnz_total = 0;
  for (const auto& tree : docs) {
    const hierattn::LinearDoc d = hierattn::linearize(tree);
    const hierattn::mask::AttnMask m = hierattn::mask::doc_mask(d);
    const hierattn::mask::MaskStats stats = hierattn::mask::mask_stats(m);
    const int diam = hierattn::mask::diameter(m);
    density_sum += stats.density;
    diameter_sum += diam;
    nnz_total += stats.nnz;
    if (csv) {
      text += std::to_string(stats.n) + "," + std::to_string(stats.nnz) + "," +
              fmt_double(stats.density) + "," + std::to_string(diam) + "," +
              std::to_string(d.s_max) + "\n";
    } else {
      ordered_json rec{{"n", stats.n},
                       {"nnz", stats.nnz},
                       {"density", stats.density},
                       {"diameter", diam},
                       {"s_max", d.s_max}};
      text += rec.dump() + "\n";
    }
  }
  if (!csv) {
    ordered_json agg{{"aggregate", true},
                     {"documents", docs.size()},
                     {"total_nnz", nnz_total},
                     {"mean_density", density_sum / static_cast<double>(docs.size())},
                     {"mean_diameter",
                      static_cast<double>(diameter_sum) / static_cast<double>(docs.size())}};
    text += agg.dump() + "\n";
  }
  write_text_file(out_path, text);
  write_manifest(out_path + ".manifest.json", "mask-stats", g,
                 ordered_json{{"docs", o.docs}, {"format", csv ? "csv" : "json"}},
                 {{o.docs, hierattn::io::hex64(hierattn::io::fnv1a_file(o.docs))}}, {out_path});
  std::cout << "wrote stats for " << docs.size() << " documents to " << out_path << "\n";
}

// ---------------------------------------------------------------------------
// bench-attention

struct BenchOpts {
  std::vector<int> n_values;
  std::string shape = "4x8x14";
  int bq = 128, bk = 64, dk = 64;
  int window = 512;
  int repeat = 3;
  bool sorted_only = false;
  bool unsorted_only = false;
};

struct ShapeSpec {
  int sections, sentences, tokens;
};

ShapeSpec parse_shape(const std::string& text) {
  ShapeSpec s{};
  if (std::sscanf(text.c_str(), "%dx%dx%d", &s.sections, &s.sentences, &s.tokens) != 3 ||
      s.sections < 1 || s.sentences < 1 || s.tokens < 1)
    throw DataError("bad --shape '" + text + "', expected SECSxSENTSxTOKENS");
  return s;
}

template <class S>
double time_tiled_ms(const hierattn::LinearDoc& d, const hierattn::engine::LevelPermutation& perm,
                     int bq, int bk, int dk, int repeat, std::uint64_t seed) {
  if (repeat < 1) return 0.0;
  hierattn::rng::Rng gen(seed);
  const auto in = hierattn::engine::random_attention_input<S>(d.n(), dk, gen);
  double total_ms = 0.0;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = hierattn::engine::tiled_forward_with_permutation(in, d, perm, bq, bk);
    const auto t1 = std::chrono::steady_clock::now();
    total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (!out.allFinite()) throw NumericError("bench-attention: non-finite output");
  }
  return total_ms / repeat;
}

void run_bench(const GlobalOpts& g, const BenchOpts& o) {
  const std::string out_path = require_out(g);
  const ShapeSpec shape = parse_shape(o.shape);
  hierattn::SynthShape synth{shape.tokens, shape.tokens, shape.sentences, shape.sentences, 1000};

  std::vector<int> targets = o.n_values;
  if (targets.empty())
    targets.push_back(1 + shape.sections * (1 + shape.sentences * (1 + shape.tokens)));

  std::vector<const char*> orders;
  if (!o.unsorted_only) orders.push_back("sorted");
  if (!o.sorted_only) orders.push_back("unsorted");
  if (orders.empty()) throw DataError("bench-attention: --sorted and --unsorted exclude each other");

  const bool json = g.format == "json";
  std::string text;
  if (!json) text += "order,n,s_max,total_blocks,nonempty,skip_ratio,window_nonempty,wall_ms\n";
  for (int target : targets) {
    const hierattn::LinearDoc d = hierattn::make_synthetic_doc(
        hierattn::rng::derive(g.seed, "bench-doc", static_cast<std::uint64_t>(target)), target,
        synth);
    const hierattn::engine::SkipReport rep = hierattn::engine::skip_report(d, o.bq, o.bk, o.dk);
    const long window_tiles =
        hierattn::engine::fixed_window_tile_count(d.n(), o.window, o.bq, o.bk);
    for (const char* order : orders) {
      const bool sorted = std::string(order) == "sorted";
      const long nonempty = sorted ? rep.nonempty_sorted : rep.nonempty_unsorted;
      const double ratio = sorted ? rep.skip_ratio_sorted : rep.skip_ratio_unsorted;
      const auto perm = sorted ? hierattn::engine::sort_kv(d)
                               : hierattn::engine::identity_permutation(d.n());
      const std::uint64_t qkv_seed =
          hierattn::rng::derive(g.seed, "bench-qkv", static_cast<std::uint64_t>(target));
      const double wall_ms =
          g.fp == 32 ? time_tiled_ms<float>(d, perm, o.bq, o.bk, o.dk, o.repeat, qkv_seed)
                     : time_tiled_ms<double>(d, perm, o.bq, o.bk, o.dk, o.repeat, qkv_seed);
      if (json) {
        ordered_json rec{{"order", order},
                         {"n", d.n()},
                         {"s_max", d.s_max},
                         {"total_blocks", rep.total_blocks},
                         {"nonempty", nonempty},
                         {"skip_ratio", ratio},
                         {"window_nonempty", window_tiles},
                         {"wall_ms", wall_ms}};
        text += rec.dump() + "\n";
      } else {
        text += std::string(order) + "," + std::to_string(d.n()) + "," +
                std::to_string(d.s_max) + "," + std::to_string(rep.total_blocks) + "," +
                std::to_string(nonempty) + "," + fmt_double(ratio) + "," +
                std::to_string(window_tiles) + "," + fmt_double(wall_ms) + "\n";
      }
    }
  }
  write_text_file(out_path, text);
  ordered_json cfg{{"n", targets},       {"shape", o.shape},   {"bq", o.bq},
                   {"bk", o.bk},         {"dk", o.dk},         {"window", o.window},
                   {"repeat", o.repeat}, {"orders", ordered_json::array()}};
  for (const char* order : orders) cfg["orders"].push_back(order);
  write_manifest(out_path + ".manifest.json", "bench-attention", g, cfg, {}, {out_path});
  std::cout << "wrote " << targets.size() * orders.size() << " bench rows to " << out_path << "\n";
}

// ---------------------------------------------------------------------------
// train / eval

struct TrainOpts {
  std::string data;
  std::string variant = "b";
  int layers = 4, d_model = 64, heads = 4, d_ff = 256;
  bool pe = false;
  double dropout = 0.0;
  double lr = 3e-4, weight_decay = 0.01;
  int batch = 32, steps = 1000, grad_accum = 1, eval_interval = 200;
  std::string optimizer = "adamw";
};

hierattn::encoder::ModelConfig model_config_from(const TrainOpts& o) {
  hierattn::encoder::ModelConfig cfg = hierattn::listops::default_model_config();
  cfg.n_layers = o.layers;
  cfg.d_model = o.d_model;
  cfg.heads = o.heads;
  cfg.d_ff = o.d_ff;
  cfg.pe_enabled = o.pe;
  cfg.dropout = o.dropout;
  cfg.validate();
  return cfg;
}

hierattn::encoder::TrainConfig train_config_from(const TrainOpts& o, std::uint64_t seed) {
  hierattn::encoder::TrainConfig tcfg;
  tcfg.lr = o.lr;
  tcfg.batch_size = o.batch;
  tcfg.steps = o.steps;
  tcfg.seed = seed;
  tcfg.grad_accum = o.grad_accum;
  tcfg.eval_interval = o.eval_interval;
  tcfg.weight_decay = o.weight_decay;
  if (o.optimizer == "sgd") tcfg.opt = hierattn::encoder::TrainConfig::Opt::Sgd;
  else if (o.optimizer == "adamw") tcfg.opt = hierattn::encoder::TrainConfig::Opt::AdamW;
  else throw DataError("unknown optimizer '" + o.optimizer + "'");
  return tcfg;
}

ordered_json trace_to_json(const hierattn::encoder::Trace& trace) {
  ordered_json evals = ordered_json::array();
  for (const auto& e : trace.evals) evals.push_back(ordered_json{{"step", e.step}, {"acc", e.acc}});
  return ordered_json{{"loss", trace.loss}, {"evals", evals}};
}

template <class S>
void run_train_typed(const GlobalOpts& g, const TrainOpts& o,
                     hierattn::listops::Variant variant) {
  const fs::path dir = require_out(g);
  fs::create_directories(dir);
  const std::string train_path = (fs::path(o.data) / "train.tsv").string();
  const std::string val_path = (fs::path(o.data) / "val.tsv").string();
  const auto train_samples = hierattn::listops::read_dataset(train_path);
  const auto val_samples = hierattn::listops::read_dataset(val_path);

  const hierattn::encoder::ModelConfig cfg = model_config_from(o);
  const hierattn::encoder::TrainConfig tcfg = train_config_from(o, g.seed);

  std::vector<hierattn::encoder::Example<S>> train_set, val_set;
  train_set.reserve(train_samples.size());
  for (const auto& s : train_samples)
    train_set.push_back(hierattn::listops::make_example<S>(s, variant, cfg));
  val_set.reserve(val_samples.size());
  for (const auto& s : val_samples)
    val_set.push_back(hierattn::listops::make_example<S>(s, variant, cfg));

  auto params =
      hierattn::encoder::init_params<S>(cfg, hierattn::rng::derive(g.seed, "init"));
  hierattn::encoder::Trace trace;
  if (tcfg.steps > 0) trace = hierattn::encoder::train(params, cfg, tcfg, train_set, val_set);
  const double val_acc = hierattn::encoder::evaluate(params, cfg, val_set);

  const std::string ckpt_path = (dir / "checkpoint.bin").string();
  const ordered_json extra{{"variant", hierattn::listops::variant_name(variant)},
                           {"seed", g.seed}};
  hierattn::encoder::save_checkpoint(ckpt_path, cfg, params, extra.dump());

  ordered_json metrics = trace_to_json(trace);
  metrics["final_train_loss"] = trace.loss.empty() ? ordered_json(nullptr)
                                                   : ordered_json(trace.loss.back());
  metrics["val_acc"] = val_acc;
  const std::string metrics_path = (dir / "metrics.json").string();
  write_text_file(metrics_path, metrics.dump(2) + "\n");

  write_manifest((dir / "manifest.json").string(), "train", g,
                 ordered_json{{"data", o.data},
                              {"variant", hierattn::listops::variant_name(variant)},
                              {"layers", o.layers},
                              {"d_model", o.d_model},
                              {"heads", o.heads},
                              {"d_ff", o.d_ff},
                              {"pe", o.pe},
                              {"dropout", o.dropout},
                              {"lr", o.lr},
                              {"weight_decay", o.weight_decay},
                              {"batch", o.batch},
                              {"steps", o.steps},
                              {"grad_accum", o.grad_accum},
                              {"eval_interval", o.eval_interval},
                              {"optimizer", o.optimizer}},
                 {{train_path, hierattn::io::hex64(hierattn::io::fnv1a_file(train_path))},
                  {val_path, hierattn::io::hex64(hierattn::io::fnv1a_file(val_path))}},
                 {ckpt_path, metrics_path});
  std::cout << "val accuracy " << fmt_double(val_acc) << ", checkpoint at " << ckpt_path << "\n";
}

void run_train(const GlobalOpts& g, const TrainOpts& o) {
  const auto variant = hierattn::listops::parse_variant(o.variant);
  if (!variant) throw DataError("unknown variant '" + o.variant + "'");
  if (g.fp == 32) run_train_typed<float>(g, o, *variant);
  else run_train_typed<double>(g, o, *variant);
}

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string variant;  // empty: use the checkpoint's variant
};

template <class S>
double run_eval_typed(const EvalOpts& o, hierattn::listops::Variant variant) {
  hierattn::encoder::ModelConfig cfg;
  const auto params = hierattn::encoder::load_checkpoint<S>(o.checkpoint, cfg);
  const auto samples = hierattn::listops::read_dataset(o.data);
  std::vector<hierattn::encoder::Example<S>> set;
  set.reserve(samples.size());
  for (const auto& s : samples)
    set.push_back(hierattn::listops::make_example<S>(s, variant, cfg));
  return hierattn::encoder::evaluate(params, cfg, set);
}

void run_eval(const GlobalOpts& g, const EvalOpts& o) {
  const std::string out_path = require_out(g);
  const hierattn::encoder::CheckpointInfo info = hierattn::encoder::checkpoint_info(o.checkpoint);
  std::string variant_name = o.variant;
  if (variant_name.empty()) {
    const auto extra = nlohmann::json::parse(info.extra_json);
    variant_name = extra.value("variant", "b");
  }
  const auto variant = hierattn::listops::parse_variant(variant_name);
  if (!variant) throw DataError("unknown variant '" + variant_name + "'");

  const double acc = info.fp_width == 32 ? run_eval_typed<float>(o, *variant)
                                         : run_eval_typed<double>(o, *variant);
  const auto samples = hierattn::listops::read_dataset(o.data);
  ordered_json result{{"accuracy", acc},
                      {"samples", samples.size()},
                      {"variant", variant_name},
                      {"checkpoint", o.checkpoint}};
  write_text_file(out_path, result.dump(2) + "\n");
  write_manifest(out_path + ".manifest.json", "eval", g,
                 ordered_json{{"checkpoint", o.checkpoint},
                              {"data", o.data},
                              {"variant", variant_name}},
                 {{o.checkpoint, hierattn::io::hex64(hierattn::io::fnv1a_file(o.checkpoint))},
                  {o.data, hierattn::io::hex64(hierattn::io::fnv1a_file(o.data))}},
                 {out_path});
  std::cout << "accuracy " << fmt_double(acc) << "\n";
}

// ---------------------------------------------------------------------------
// ablation

struct AblationOpts {
  int train = 20000, val = 2000, test = 5000;
  int depth = 10;
  TrainOpts train_opts;  // model/optimizer fields reused; data/variant unused
  std::string variants = "dense,rgb,gb,b";
};

void run_ablation_cmd(const GlobalOpts& g, const AblationOpts& o) {
  const fs::path dir = require_out(g);
  fs::create_directories(dir);

  hierattn::listops::AblationConfig cfg;
  cfg.gen.max_depth = o.depth;
  cfg.train_n = o.train;
  cfg.val_n = o.val;
  cfg.test_n = o.test;
  cfg.seed = g.seed;
  cfg.model = model_config_from(o.train_opts);
  cfg.tcfg = train_config_from(o.train_opts, g.seed);
  cfg.variants.clear();
  std::stringstream ss(o.variants);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto v = hierattn::listops::parse_variant(name);
    if (!v) throw DataError("unknown variant '" + name + "'");
    cfg.variants.push_back(*v);
  }
  if (cfg.variants.empty()) throw DataError("ablation: no variants selected");

  const auto results = hierattn::listops::run_ablation(cfg);

  ordered_json table = ordered_json::array();
  ordered_json curves = ordered_json::object();
  for (const auto& r : results) {
    table.push_back(
        ordered_json{{"variant", hierattn::listops::variant_name(r.variant)},
                     {"test_acc", r.test_acc},
                     {"reference_full_scale", hierattn::listops::reference_accuracy(r.variant)}});
    curves[hierattn::listops::variant_name(r.variant)] = trace_to_json(r.trace);
  }
  ordered_json doc{{"table", table}, {"curves", curves}};
  const std::string out_json = (dir / "ablation.json").string();
  write_text_file(out_json, doc.dump(2) + "\n");

  write_manifest((dir / "manifest.json").string(), "ablation", g,
                 ordered_json{{"train", o.train},
                              {"val", o.val},
                              {"test", o.test},
                              {"depth", o.depth},
                              {"variants", o.variants},
                              {"layers", o.train_opts.layers},
                              {"d_model", o.train_opts.d_model},
                              {"heads", o.train_opts.heads},
                              {"d_ff", o.train_opts.d_ff},
                              {"pe", o.train_opts.pe},
                              {"lr", o.train_opts.lr},
                              {"batch", o.train_opts.batch},
                              {"steps", o.train_opts.steps},
                              {"optimizer", o.train_opts.optimizer}},
                 {}, {out_json});
  for (const auto& r : results)
    std::cout << hierattn::listops::variant_name(r.variant) << " test accuracy "
              << fmt_double(r.test_acc) << "\n";
}

void add_model_flags(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--layers", o.layers, "encoder layers");
  cmd->add_option("--d-model", o.d_model, "model width");
  cmd->add_option("--heads", o.heads, "attention heads");
  cmd->add_option("--d-ff", o.d_ff, "feed-forward width");
  cmd->add_flag("--pe", o.pe, "enable positional encoding");
  cmd->add_option("--dropout", o.dropout, "dropout rate");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--weight-decay", o.weight_decay, "AdamW weight decay");
  cmd->add_option("--batch", o.batch, "batch size");
  cmd->add_option("--steps", o.steps, "optimizer steps");
  cmd->add_option("--grad-accum", o.grad_accum, "gradient accumulation factor");
  cmd->add_option("--eval-interval", o.eval_interval, "steps between validation passes");
  cmd->add_option("--optimizer", o.optimizer, "adamw or sgd");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical sparse attention toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root seed; all randomness derives from it");
  app.add_option("--fp", g.fp, "floating point width")->check(CLI::IsMember({32, 64}));
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"json", "csv"}));

  GenListopsOpts gen_opts;
  CLI::App* gen = app.add_subcommand("gen-listops", "generate ListOps dataset splits");
  gen->add_option("--train", gen_opts.train, "training samples");
  gen->add_option("--val", gen_opts.val, "validation samples");
  gen->add_option("--test", gen_opts.test, "test samples");
  gen->add_option("--depth", gen_opts.depth, "maximum tree depth");
  gen->add_option("--min-args", gen_opts.min_args, "minimum operands per operator");
  gen->add_option("--max-args", gen_opts.max_args, "maximum operands per operator");
  gen->add_option("--p-sub", gen_opts.p_sub, "probability of a nested operator");
  gen->add_option("--cap", gen_opts.cap, "token cap; longer samples are re-drawn");

  MaskStatsOpts mask_opts;
  CLI::App* mstats = app.add_subcommand("mask-stats", "per-document mask statistics");
  mstats->add_option("--docs", mask_opts.docs, "document file (JSON lines)")->required();

  BenchOpts bench_opts;
  CLI::App* bench = app.add_subcommand("bench-attention", "tile occupancy and kernel timing");
  bench->add_option("--n", bench_opts.n_values, "target document sizes (repeatable)");
  bench->add_option("--shape", bench_opts.shape, "sections x sentences x tokens");
  bench->add_option("--bq", bench_opts.bq, "query block rows");
  bench->add_option("--bk", bench_opts.bk, "key block cols");
  bench->add_option("--dk", bench_opts.dk, "head dimension for timing/flops");
  bench->add_option("--window", bench_opts.window, "fixed-window comparator size");
  bench->add_option("--repeat", bench_opts.repeat,
                    "timing repetitions; 0 skips timing for reproducible output");
  bench->add_flag("--sorted", bench_opts.sorted_only, "only the level-sorted key order");
  bench->add_flag("--unsorted", bench_opts.unsorted_only, "only the identity key order");

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "train a ListOps encoder");
  train->add_option("--data", train_opts.data, "dataset directory (train.tsv, val.tsv)")
      ->required();
  train->add_option("--variant", train_opts.variant, "attention variant: dense, rgb, gb, b");
  add_model_flags(train, train_opts);

  EvalOpts eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")->required();
  eval->add_option("--data", eval_opts.data, "dataset file (tsv)")->required();
  eval->add_option("--variant", eval_opts.variant, "override the checkpoint's variant");

  AblationOpts abl_opts;
  CLI::App* abl = app.add_subcommand("ablation", "train and test every attention variant");
  abl->add_option("--train", abl_opts.train, "training samples");
  abl->add_option("--val", abl_opts.val, "validation samples");
  abl->add_option("--test", abl_opts.test, "test samples");
  abl->add_option("--depth", abl_opts.depth, "maximum tree depth");
  abl->add_option("--variants", abl_opts.variants, "comma-separated variant list");
  add_model_flags(abl, abl_opts.train_opts);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) run_gen_listops(g, gen_opts);
    else if (mstats->parsed()) run_mask_stats(g, mask_opts);
    else if (bench->parsed()) run_bench(g, bench_opts);
    else if (train->parsed()) run_train(g, train_opts);
    else if (eval->parsed()) run_eval(g, eval_opts);
    else if (abl->parsed()) run_ablation_cmd(g, abl_opts);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
