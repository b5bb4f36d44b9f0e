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
#include <string>
#include <vector>

#include "hierattn/doc_model.hpp"
#include "hierattn/mask.hpp"
#include "hierattn/rng.hpp"

namespace hierattn::encoder {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
  int n_layers = 4;
  int d_model = 64;
  int heads = 4;
  int d_ff = 256;
  int vocab_size = 14;
  int n_classes = 10;
  int levels = kLevels;
  double dropout = 0.0;
  bool pe_enabled = true;

  int d_k() const { return d_model / heads; }
  // Three trailing rows hold the document/section/sentence anchor embeddings.
  int embed_rows() const { return vocab_size + 3; }
  void validate() const;
};

// All tensors are matrices; vectors are stored as column matrices so the
// optimizer, checkpointing and gradient checks can walk one uniform registry.
template <class S>
struct LayerParams {
  Mat<S> ln1_g, ln1_b;     // d_model x 1
  Mat<S> wq, wk, wv, wo;   // d_model x d_model
  Mat<S> ln2_g, ln2_b;     // d_model x 1
  Mat<S> w1;               // d_model x d_ff
  Mat<S> b1;               // d_ff x 1
  Mat<S> w2;               // d_ff x d_model
  Mat<S> b2;               // d_model x 1
};

template <class S>
struct EncoderParams {
  Mat<S> embedding;  // embed_rows x d_model
  std::vector<LayerParams<S>> layers;
  Mat<S> lnf_g, lnf_b;  // d_model x 1
  Mat<S> w_cls;         // d_model x n_classes
  Mat<S> b_cls;         // n_classes x 1
};

// Scaled-uniform init (+-1/sqrt(fan_in)), layer-norm gains 1, biases 0.
template <class S>
EncoderParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <class S>
EncoderParams<S> zero_params(const ModelConfig& cfg);

template <class S>
struct TensorRef {
  std::string name;
  Mat<S>* tensor;
};

template <class S>
std::vector<TensorRef<S>> tensor_refs(EncoderParams<S>& p);

// Sequence the encoder consumes: resolved embedding rows, an attention mask
// with a dense form, and an optional precomputed positional encoding.
template <class S>
struct EncoderInput {
  std::vector<std::int32_t> rows;
  mask::AttnMask attn;
  Mat<S> pos_enc;  // n x d_model, or 0x0 when disabled

  int n() const { return static_cast<int>(rows.size()); }
};

// Anchors map to the trailing embedding rows; regular ids must be < vocab_size.
template <class S>
EncoderInput<S> document_input(const LinearDoc& doc, const ModelConfig& cfg);

template <class S>
struct LayerCache {
  Mat<S> x_in;
  Mat<S> mu1, rstd1, xhat1;
  Mat<S> q, k, v;
  std::vector<Mat<S>> attn_w;  // per head, n x n post-softmax weights
  Mat<S> attn_cat;
  Mat<S> drop1;  // dropout mask on the attention sub-layer output (may be empty)
  Mat<S> x_mid;
  Mat<S> mu2, rstd2, xhat2;
  Mat<S> z1, g1;  // FFN pre-activation and GELU output
  Mat<S> drop2;   // dropout mask on the FFN sub-layer output (may be empty)
};

template <class S>
struct ForwardCache {
  Mat<S> x0;
  std::vector<LayerCache<S>> layers;
  Mat<S> x_final;
  Mat<S> xhat_f;  // 1 x d_model
  S mu_f = S(0);
  S rstd_f = S(0);
};

// Pre-LN stack; logits read from the position-0 representation.
// Pass a cache to keep activations for backward; pass dropout_gen to sample
// dropout masks (training mode) when cfg.dropout > 0.
template <class S>
Mat<S> forward(const EncoderParams<S>& p, const ModelConfig& cfg, const EncoderInput<S>& in,
               ForwardCache<S>* cache = nullptr, rng::Rng* dropout_gen = nullptr);

// Cross-entropy: -log softmax(logits)[label].
template <class S>
S loss(const Mat<S>& logits, int label);

// Accumulates weight * d(loss)/d(params) into grad. Requires the cache of the
// forward pass that produced the loss.
template <class S>
void backward(const EncoderParams<S>& p, const ModelConfig& cfg, const EncoderInput<S>& in,
              int label, const ForwardCache<S>& cache, S weight, EncoderParams<S>& grad);

struct TrainConfig {
  double lr = 3e-4;
  int batch_size = 32;
  int steps = 1000;
  std::uint64_t seed = 1;
  enum class Opt { Sgd, AdamW } opt = Opt::AdamW;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int grad_accum = 1;
  int eval_interval = 0;  // 0 disables mid-train evaluation
};

template <class S>
struct Example {
  EncoderInput<S> input;
  int label;
};

struct EvalPoint {
  long step;
  double acc;
};

struct Trace {
  std::vector<double> loss;       // one entry per optimizer step
  std::vector<EvalPoint> evals;
};

// Deterministic given cfg.seed; throws NumericError with the step index if
// the loss becomes non-finite.
template <class S>
Trace train(EncoderParams<S>& params, const ModelConfig& cfg, const TrainConfig& tcfg,
            const std::vector<Example<S>>& train_set, const std::vector<Example<S>>& val_set);

template <class S>
double evaluate(const EncoderParams<S>& params, const ModelConfig& cfg,
                const std::vector<Example<S>>& data);

// Versioned binary checkpoint: magic, JSON header (config, extra metadata,
// tensor directory), then row-major little-endian scalar data.
template <class S>
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const EncoderParams<S>& params, const std::string& extra_json = "{}");

struct CheckpointInfo {
  int fp_width = 64;  // 32 or 64
  ModelConfig config;
  std::string extra_json;
};

CheckpointInfo checkpoint_info(const std::string& path);

template <class S>
EncoderParams<S> load_checkpoint(const std::string& path, ModelConfig& cfg_out);

}  // namespace hierattn::encoder
