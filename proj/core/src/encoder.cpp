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

#include "hierattn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "hierattn/errors.hpp"
#include "hierattn/hpe.hpp"
#include "json.hpp"

namespace hierattn::encoder {

void ModelConfig::validate() const {
  if (n_layers < 1 || d_model < 1 || heads < 1 || d_ff < 1 || vocab_size < 1 || n_classes < 1)
    throw DataError("ModelConfig: all dimensions must be positive");
  if (d_model % heads != 0) throw DataError("ModelConfig: d_model must equal heads * d_k");
  if (d_ff < d_model) throw DataError("ModelConfig: d_ff must be >= d_model");
  if (dropout < 0.0 || dropout >= 1.0) throw DataError("ModelConfig: dropout must be in [0, 1)");
}

namespace {

template <class S>
S gelu(S z) {
  return S(0.5) * z * (S(1) + static_cast<S>(std::erf(static_cast<double>(z) * std::numbers::sqrt2 / 2.0)));
}

template <class S>
S gelu_grad(S z) {
  const double zd = static_cast<double>(z);
  const double phi = std::exp(-0.5 * zd * zd) / std::sqrt(2.0 * std::numbers::pi);
  const double Phi = 0.5 * (1.0 + std::erf(zd * std::numbers::sqrt2 / 2.0));
  return static_cast<S>(Phi + zd * phi);
}

// Row-wise layer norm over features. Returns y; fills mu, rstd (n x 1) and
// xhat (n x d).
template <class S>
Mat<S> ln_forward(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta, Mat<S>& mu,
                  Mat<S>& rstd, Mat<S>& xhat) {
  const Eigen::Index n = x.rows(), d = x.cols();
  mu.resize(n, 1);
  rstd.resize(n, 1);
  xhat.resize(n, d);
  Mat<S> y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S m = x.row(i).mean();
    const S var = (x.row(i).array() - m).square().sum() / static_cast<S>(d);
    const S r = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    mu(i, 0) = m;
    rstd(i, 0) = r;
    xhat.row(i) = (x.row(i).array() - m) * r;
    y.row(i) = xhat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return y;
}

// Backward of ln_forward; accumulates into dgamma/dbeta and returns dx.
template <class S>
Mat<S> ln_backward(const Mat<S>& dy, const Mat<S>& gamma, const Mat<S>& rstd, const Mat<S>& xhat,
                   Mat<S>& dgamma, Mat<S>& dbeta) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  dgamma += (dy.cwiseProduct(xhat)).colwise().sum().transpose();
  dbeta += dy.colwise().sum().transpose();
  Mat<S> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dyg = dy.row(i).cwiseProduct(gamma.transpose());
    const S mean_dyg = dyg.mean();
    const S mean_dyg_xhat = dyg.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) =
        (rstd(i, 0) * (dyg.array() - mean_dyg - xhat.row(i).array() * mean_dyg_xhat)).matrix();
  }
  return dx;
}

// Masked row softmax of (q k^T * scale) per head; returns the weight matrix.
template <class S>
Mat<S> masked_softmax(const Mat<S>& qh, const Mat<S>& kh, S scale, const mask::AttnMask& m) {
  const int n = static_cast<int>(qh.rows());
  Mat<S> a = qh * kh.transpose() * scale;
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
  return a;
}

template <class S>
Mat<S> sample_dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, rng::Rng& gen) {
  const S keep_inv = static_cast<S>(1.0 / (1.0 - rate));
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = gen.uniform() < rate ? S(0) : keep_inv;
  return m;
}

template <class S>
Mat<S> uniform_tensor(Eigen::Index rows, Eigen::Index cols, double bound, rng::Rng& gen) {
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<S>((gen.uniform() * 2.0 - 1.0) * bound);
  return m;
}

}  // namespace

template <class S>
EncoderParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  rng::Rng gen(rng::derive(seed, "init"));
  EncoderParams<S> p;
  const double emb_bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  const double dm_bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  const double ff_bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_ff));
  p.embedding = uniform_tensor<S>(cfg.embed_rows(), cfg.d_model, emb_bound, gen);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.ln1_g = Mat<S>::Ones(cfg.d_model, 1);
    l.ln1_b = Mat<S>::Zero(cfg.d_model, 1);
    l.wq = uniform_tensor<S>(cfg.d_model, cfg.d_model, dm_bound, gen);
    l.wk = uniform_tensor<S>(cfg.d_model, cfg.d_model, dm_bound, gen);
    l.wv = uniform_tensor<S>(cfg.d_model, cfg.d_model, dm_bound, gen);
    l.wo = uniform_tensor<S>(cfg.d_model, cfg.d_model, dm_bound, gen);
    l.ln2_g = Mat<S>::Ones(cfg.d_model, 1);
    l.ln2_b = Mat<S>::Zero(cfg.d_model, 1);
    l.w1 = uniform_tensor<S>(cfg.d_model, cfg.d_ff, dm_bound, gen);
    l.b1 = Mat<S>::Zero(cfg.d_ff, 1);
    l.w2 = uniform_tensor<S>(cfg.d_ff, cfg.d_model, ff_bound, gen);
    l.b2 = Mat<S>::Zero(cfg.d_model, 1);
  }
  p.lnf_g = Mat<S>::Ones(cfg.d_model, 1);
  p.lnf_b = Mat<S>::Zero(cfg.d_model, 1);
  p.w_cls = uniform_tensor<S>(cfg.d_model, cfg.n_classes, dm_bound, gen);
  p.b_cls = Mat<S>::Zero(cfg.n_classes, 1);
  return p;
}

template <class S>
EncoderParams<S> zero_params(const ModelConfig& cfg) {
  cfg.validate();
  EncoderParams<S> p;
  p.embedding = Mat<S>::Zero(cfg.embed_rows(), cfg.d_model);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.ln1_g = Mat<S>::Zero(cfg.d_model, 1);
    l.ln1_b = Mat<S>::Zero(cfg.d_model, 1);
    l.wq = Mat<S>::Zero(cfg.d_model, cfg.d_model);
    l.wk = Mat<S>::Zero(cfg.d_model, cfg.d_model);
    l.wv = Mat<S>::Zero(cfg.d_model, cfg.d_model);
    l.wo = Mat<S>::Zero(cfg.d_model, cfg.d_model);
    l.ln2_g = Mat<S>::Zero(cfg.d_model, 1);
    l.ln2_b = Mat<S>::Zero(cfg.d_model, 1);
    l.w1 = Mat<S>::Zero(cfg.d_model, cfg.d_ff);
    l.b1 = Mat<S>::Zero(cfg.d_ff, 1);
    l.w2 = Mat<S>::Zero(cfg.d_ff, cfg.d_model);
    l.b2 = Mat<S>::Zero(cfg.d_model, 1);
  }
  p.lnf_g = Mat<S>::Zero(cfg.d_model, 1);
  p.lnf_b = Mat<S>::Zero(cfg.d_model, 1);
  p.w_cls = Mat<S>::Zero(cfg.d_model, cfg.n_classes);
  p.b_cls = Mat<S>::Zero(cfg.n_classes, 1);
  return p;
}

template <class S>
std::vector<TensorRef<S>> tensor_refs(EncoderParams<S>& p) {
  std::vector<TensorRef<S>> refs;
  refs.push_back({"embedding", &p.embedding});
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    auto& lp = p.layers[l];
    refs.push_back({pre + "ln1_g", &lp.ln1_g});
    refs.push_back({pre + "ln1_b", &lp.ln1_b});
    refs.push_back({pre + "wq", &lp.wq});
    refs.push_back({pre + "wk", &lp.wk});
    refs.push_back({pre + "wv", &lp.wv});
    refs.push_back({pre + "wo", &lp.wo});
    refs.push_back({pre + "ln2_g", &lp.ln2_g});
    refs.push_back({pre + "ln2_b", &lp.ln2_b});
    refs.push_back({pre + "w1", &lp.w1});
    refs.push_back({pre + "b1", &lp.b1});
    refs.push_back({pre + "w2", &lp.w2});
    refs.push_back({pre + "b2", &lp.b2});
  }
  refs.push_back({"head.lnf_g", &p.lnf_g});
  refs.push_back({"head.lnf_b", &p.lnf_b});
  refs.push_back({"head.w_cls", &p.w_cls});
  refs.push_back({"head.b_cls", &p.b_cls});
  return refs;
}

template <class S>
EncoderInput<S> document_input(const LinearDoc& doc, const ModelConfig& cfg) {
  cfg.validate();
  EncoderInput<S> in;
  in.rows.reserve(static_cast<std::size_t>(doc.n()));
  for (const LinearTok& t : doc.tokens) {
    if (t.kind == NodeKind::Regular) {
      if (t.id < 0 || t.id >= cfg.vocab_size)
        throw DataError("document_input: token id " + std::to_string(t.id) +
                        " outside vocabulary of size " + std::to_string(cfg.vocab_size));
      in.rows.push_back(t.id);
    } else {
      in.rows.push_back(cfg.vocab_size + level_of(t.kind));
    }
  }
  in.attn = mask::doc_mask(doc);
  if (cfg.pe_enabled)
    in.pos_enc = hpe::encode_sequence<S>(doc, hpe::EncodingConfig{cfg.d_model, cfg.levels});
  return in;
}

template <class S>
Mat<S> forward(const EncoderParams<S>& p, const ModelConfig& cfg, const EncoderInput<S>& in,
               ForwardCache<S>* cache, rng::Rng* dropout_gen) {
  cfg.validate();
  const int n = in.n();
  if (n < 1) throw DataError("forward: empty input");
  if (!in.attn.has_dense() || in.attn.n != n)
    throw DataError("forward: input mask must carry a dense form of matching size");
  const int d = cfg.d_model;
  const int d_k = cfg.d_k();
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_k)));
  const bool use_dropout = cfg.dropout > 0.0 && dropout_gen != nullptr;

  Mat<S> x(n, d);
  for (int i = 0; i < n; ++i) {
    const std::int32_t r = in.rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= cfg.embed_rows())
      throw DataError("forward: embedding row " + std::to_string(r) + " out of range");
    x.row(i) = p.embedding.row(r);
  }
  if (in.pos_enc.size() > 0) {
    if (in.pos_enc.rows() != n || in.pos_enc.cols() != d)
      throw DataError("forward: positional encoding shape mismatch");
    x += in.pos_enc;
  }

  if (cache) {
    cache->x0 = x;
    cache->layers.assign(static_cast<std::size_t>(cfg.n_layers), LayerCache<S>{});
  }

  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams<S>& lp = p.layers[static_cast<std::size_t>(l)];
    LayerCache<S> local;
    LayerCache<S>& c = cache ? cache->layers[static_cast<std::size_t>(l)] : local;
    c.x_in = x;

    // Attention sub-layer with pre-LN and residual.
    const Mat<S> a = ln_forward(x, lp.ln1_g, lp.ln1_b, c.mu1, c.rstd1, c.xhat1);
    c.q = a * lp.wq;
    c.k = a * lp.wk;
    c.v = a * lp.wv;
    c.attn_w.resize(static_cast<std::size_t>(cfg.heads));
    c.attn_cat.resize(n, d);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto qh = c.q.middleCols(h * d_k, d_k);
      const auto kh = c.k.middleCols(h * d_k, d_k);
      c.attn_w[static_cast<std::size_t>(h)] = masked_softmax<S>(qh, kh, scale, in.attn);
      c.attn_cat.middleCols(h * d_k, d_k).noalias() =
          c.attn_w[static_cast<std::size_t>(h)] * c.v.middleCols(h * d_k, d_k);
    }
    Mat<S> attn_out = c.attn_cat * lp.wo;
    if (use_dropout) {
      c.drop1 = sample_dropout_mask<S>(n, d, cfg.dropout, *dropout_gen);
      attn_out = attn_out.cwiseProduct(c.drop1);
    }
    x += attn_out;
    c.x_mid = x;

    // FFN sub-layer with pre-LN and residual.
    const Mat<S> f = ln_forward(x, lp.ln2_g, lp.ln2_b, c.mu2, c.rstd2, c.xhat2);
    c.z1 = (f * lp.w1).rowwise() + lp.b1.transpose().row(0);
    c.g1 = c.z1.unaryExpr([](S z) { return gelu(z); });
    Mat<S> f2 = (c.g1 * lp.w2).rowwise() + lp.b2.transpose().row(0);
    if (use_dropout) {
      c.drop2 = sample_dropout_mask<S>(n, d, cfg.dropout, *dropout_gen);
      f2 = f2.cwiseProduct(c.drop2);
    }
    x += f2;

    if (!x.allFinite())
      throw NumericError("NonFiniteActivation: layer " + std::to_string(l));
  }

  // Classification head on the position-0 anchor representation.
  Mat<S> pooled = x.row(0);
  Mat<S> mu, rstd, xhat;
  const Mat<S> zf = ln_forward(pooled, p.lnf_g, p.lnf_b, mu, rstd, xhat);
  Mat<S> logits = (zf * p.w_cls).transpose() + p.b_cls;

  if (cache) {
    cache->x_final = x;
    cache->xhat_f = xhat;
    cache->mu_f = mu(0, 0);
    cache->rstd_f = rstd(0, 0);
  }
  return logits;
}

template <class S>
S loss(const Mat<S>& logits, int label) {
  const int c = static_cast<int>(logits.rows());
  if (label < 0 || label >= c) throw DataError("loss: label out of range");
  const S mx = logits.maxCoeff();
  const S lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(label, 0);
}

template <class S>
void backward(const EncoderParams<S>& p, const ModelConfig& cfg, const EncoderInput<S>& in,
              int label, const ForwardCache<S>& cache, S weight, EncoderParams<S>& grad) {
  const int n = in.n();
  const int d = cfg.d_model;
  const int d_k = cfg.d_k();
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_k)));

  // d loss / d logits = softmax(logits) - onehot(label).
  Mat<S> pooled = cache.x_final.row(0);
  Mat<S> xhat_f = cache.xhat_f;
  Mat<S> zf = xhat_f.cwiseProduct(p.lnf_g.transpose()) + p.lnf_b.transpose();
  Mat<S> logits = (zf * p.w_cls).transpose() + p.b_cls;
  const S mx = logits.maxCoeff();
  Mat<S> soft = ((logits.array() - mx).exp()).matrix();
  soft /= soft.sum();
  soft(label, 0) -= S(1);
  soft *= weight;

  grad.w_cls += zf.transpose() * soft.transpose();
  grad.b_cls += soft;
  Mat<S> dzf = (p.w_cls * soft).transpose();  // 1 x d

  Mat<S> rstd_f(1, 1);
  rstd_f(0, 0) = cache.rstd_f;
  Mat<S> dpooled = ln_backward(dzf, p.lnf_g, rstd_f, xhat_f, grad.lnf_g, grad.lnf_b);

  Mat<S> dx = Mat<S>::Zero(n, d);
  dx.row(0) = dpooled;

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerParams<S>& lp = p.layers[static_cast<std::size_t>(l)];
    LayerParams<S>& lg = grad.layers[static_cast<std::size_t>(l)];
    const LayerCache<S>& c = cache.layers[static_cast<std::size_t>(l)];

    // FFN sub-layer.
    Mat<S> df2 = dx;
    if (c.drop2.size() > 0) df2 = df2.cwiseProduct(c.drop2);
    const Mat<S> f = c.xhat2.cwiseProduct(lp.ln2_g.transpose().replicate(n, 1)) +
                     lp.ln2_b.transpose().replicate(n, 1);
    lg.b2 += df2.colwise().sum().transpose();
    lg.w2 += c.g1.transpose() * df2;
    Mat<S> dg1 = df2 * lp.w2.transpose();
    Mat<S> dz1 = dg1.cwiseProduct(c.z1.unaryExpr([](S z) { return gelu_grad(z); }));
    lg.b1 += dz1.colwise().sum().transpose();
    lg.w1 += f.transpose() * dz1;
    Mat<S> df = dz1 * lp.w1.transpose();
    dx += ln_backward(df, lp.ln2_g, c.rstd2, c.xhat2, lg.ln2_g, lg.ln2_b);

    // Attention sub-layer.
    Mat<S> dattn_out = dx;
    if (c.drop1.size() > 0) dattn_out = dattn_out.cwiseProduct(c.drop1);
    lg.wo += c.attn_cat.transpose() * dattn_out;
    Mat<S> dcat = dattn_out * lp.wo.transpose();

    Mat<S> dq(n, d), dk(n, d), dv(n, d);
    for (int h = 0; h < cfg.heads; ++h) {
      const Mat<S>& w = c.attn_w[static_cast<std::size_t>(h)];
      const auto vh = c.v.middleCols(h * d_k, d_k);
      const auto qh = c.q.middleCols(h * d_k, d_k);
      const auto kh = c.k.middleCols(h * d_k, d_k);
      const auto dhead = dcat.middleCols(h * d_k, d_k);

      dv.middleCols(h * d_k, d_k).noalias() = w.transpose() * dhead;
      Mat<S> dw = dhead * vh.transpose();
      // softmax backward: dA = W .* (dW - rowsum(dW .* W)); masked entries
      // carry W = 0 and therefore zero gradient.
      Mat<S> da(n, n);
      for (int i = 0; i < n; ++i) {
        const S dot = w.row(i).dot(dw.row(i));
        da.row(i) = (w.row(i).array() * (dw.row(i).array() - dot)).matrix();
      }
      dq.middleCols(h * d_k, d_k).noalias() = da * kh * scale;
      dk.middleCols(h * d_k, d_k).noalias() = da.transpose() * qh * scale;
    }

    const Mat<S> a = c.xhat1.cwiseProduct(lp.ln1_g.transpose().replicate(n, 1)) +
                     lp.ln1_b.transpose().replicate(n, 1);
    lg.wq += a.transpose() * dq;
    lg.wk += a.transpose() * dk;
    lg.wv += a.transpose() * dv;
    Mat<S> da_in = dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
    dx += ln_backward(da_in, lp.ln1_g, c.rstd1, c.xhat1, lg.ln1_g, lg.ln1_b);
  }

  for (int i = 0; i < n; ++i)
    grad.embedding.row(in.rows[static_cast<std::size_t>(i)]) += dx.row(i);
}

namespace {

template <class S>
struct AdamState {
  std::vector<Mat<S>> m, v;
  long t = 0;
};

template <class S>
void optimizer_step(const TrainConfig& tcfg, std::vector<TensorRef<S>>& params,
                    std::vector<TensorRef<S>>& grads, AdamState<S>& state) {
  const S lr = static_cast<S>(tcfg.lr);
  if (tcfg.opt == TrainConfig::Opt::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor -= lr * *grads[i].tensor;
    return;
  }
  const S b1 = static_cast<S>(tcfg.beta1), b2 = static_cast<S>(tcfg.beta2);
  const S eps = static_cast<S>(tcfg.eps), wd = static_cast<S>(tcfg.weight_decay);
  if (state.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.push_back(Mat<S>::Zero(params[i].tensor->rows(), params[i].tensor->cols()));
      state.v.push_back(Mat<S>::Zero(params[i].tensor->rows(), params[i].tensor->cols()));
    }
  }
  state.t += 1;
  const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1), static_cast<double>(state.t)));
  const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2), static_cast<double>(state.t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat<S>& g = *grads[i].tensor;
    state.m[i] = b1 * state.m[i] + (S(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (S(1) - b2) * g.cwiseProduct(g);
    const Mat<S> mhat = state.m[i] / bc1;
    const Mat<S> vhat = state.v[i] / bc2;
    *params[i].tensor -=
        lr * (mhat.array() / (vhat.array().sqrt() + eps) + wd * params[i].tensor->array()).matrix();
  }
}

}  // namespace

template <class S>
Trace train(EncoderParams<S>& params, const ModelConfig& cfg, const TrainConfig& tcfg,
            const std::vector<Example<S>>& train_set, const std::vector<Example<S>>& val_set) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  if (tcfg.batch_size < 1 || tcfg.grad_accum < 1)
    throw DataError("train: batch_size and grad_accum must be >= 1");

  Trace trace;
  EncoderParams<S> grad = zero_params<S>(cfg);
  auto param_refs = tensor_refs(params);
  auto grad_refs = tensor_refs(grad);
  AdamState<S> opt_state;
  rng::Rng dropout_gen(rng::derive(tcfg.seed, "dropout"));

  std::vector<std::int32_t> order;
  std::size_t cursor = 0;
  std::uint64_t epoch = 0;
  auto next_index = [&]() {
    if (cursor >= order.size()) {
      rng::Rng shuffle_gen(rng::derive(tcfg.seed, "shuffle", epoch++));
      order = shuffle_gen.permutation(static_cast<int>(train_set.size()));
      cursor = 0;
    }
    return static_cast<std::size_t>(order[cursor++]);
  };

  const int micro = tcfg.batch_size * tcfg.grad_accum;
  ForwardCache<S> cache;
  for (int step = 1; step <= tcfg.steps; ++step) {
    for (auto& ref : grad_refs) ref.tensor->setZero();
    double step_loss = 0.0;
    for (int b = 0; b < micro; ++b) {
      const Example<S>& ex = train_set[next_index()];
      try {
        const Mat<S> logits = forward(params, cfg, ex.input, &cache,
                                      cfg.dropout > 0.0 ? &dropout_gen : nullptr);
        step_loss += static_cast<double>(loss(logits, ex.label));
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
      }
      backward(params, cfg, ex.input, ex.label, cache, S(1) / static_cast<S>(micro), grad);
    }
    step_loss /= micro;
    if (!std::isfinite(step_loss))
      throw NumericError("training diverged at step " + std::to_string(step));
    trace.loss.push_back(step_loss);
    optimizer_step(tcfg, param_refs, grad_refs, opt_state);

    if (tcfg.eval_interval > 0 && step % tcfg.eval_interval == 0 && !val_set.empty())
      trace.evals.push_back({step, evaluate(params, cfg, val_set)});
  }
  return trace;
}

template <class S>
double evaluate(const EncoderParams<S>& params, const ModelConfig& cfg,
                const std::vector<Example<S>>& data) {
  if (data.empty()) throw DataError("evaluate: empty dataset");
  long correct = 0;
  for (const Example<S>& ex : data) {
    const Mat<S> logits = forward(params, cfg, ex.input);
    Eigen::Index best = 0;
    logits.col(0).maxCoeff(&best);
    if (static_cast<int>(best) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'A', 'C', 'K', 'P', 'T', '0', '1'};

nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
  return nlohmann::ordered_json{
      {"n_layers", cfg.n_layers},   {"d_model", cfg.d_model},
      {"heads", cfg.heads},         {"d_ff", cfg.d_ff},
      {"vocab_size", cfg.vocab_size}, {"n_classes", cfg.n_classes},
      {"levels", cfg.levels},       {"dropout", cfg.dropout},
      {"pe_enabled", cfg.pe_enabled}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.levels = j.at("levels").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.pe_enabled = j.at("pe_enabled").get<bool>();
  return cfg;
}

}  // namespace

template <class S>
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const EncoderParams<S>& params, const std::string& extra_json) {
  auto refs = tensor_refs(const_cast<EncoderParams<S>&>(params));
  nlohmann::ordered_json header;
  header["version"] = 1;
  header["fp"] = sizeof(S) == 4 ? 32 : 64;
  header["config"] = config_to_json(cfg);
  header["extra"] = nlohmann::json::parse(extra_json);
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& r : refs) {
    tensors.push_back(nlohmann::ordered_json{{"name", r.name},
                                             {"rows", r.tensor->rows()},
                                             {"cols", r.tensor->cols()},
                                             {"offset", offset}});
    offset += static_cast<std::uint64_t>(r.tensor->size()) * sizeof(S);
  }
  header["tensors"] = tensors;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t hlen = header_str.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  std::vector<S> row_buf;
  for (const auto& r : refs) {
    // row-major scalar stream
    row_buf.resize(static_cast<std::size_t>(r.tensor->cols()));
    for (Eigen::Index i = 0; i < r.tensor->rows(); ++i) {
      for (Eigen::Index j = 0; j < r.tensor->cols(); ++j)
        row_buf[static_cast<std::size_t>(j)] = (*r.tensor)(i, j);
      out.write(reinterpret_cast<const char*>(row_buf.data()),
                static_cast<std::streamsize>(row_buf.size() * sizeof(S)));
    }
  }
  if (!out) throw DataError("save_checkpoint: write failure on " + path);
}

namespace {

nlohmann::json read_checkpoint_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header_str(hlen, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("checkpoint: truncated header in " + path);
  return nlohmann::json::parse(header_str);
}

}  // namespace

CheckpointInfo checkpoint_info(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint_info: cannot open " + path);
  const nlohmann::json header = read_checkpoint_header(in, path);
  CheckpointInfo info;
  info.fp_width = header.at("fp").get<int>();
  info.config = config_from_json(header.at("config"));
  info.extra_json = header.at("extra").dump();
  return info;
}

template <class S>
EncoderParams<S> load_checkpoint(const std::string& path, ModelConfig& cfg_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  const nlohmann::json header = read_checkpoint_header(in, path);
  if (header.at("fp").get<int>() != (sizeof(S) == 4 ? 32 : 64))
    throw DataError("load_checkpoint: fp width mismatch in " + path);
  cfg_out = config_from_json(header.at("config"));
  EncoderParams<S> params = zero_params<S>(cfg_out);
  auto refs = tensor_refs(params);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != refs.size()) throw DataError("load_checkpoint: tensor count mismatch");
  std::vector<S> row_buf;
  for (std::size_t t = 0; t < refs.size(); ++t) {
    const auto& meta = tensors[t];
    if (meta.at("name").get<std::string>() != refs[t].name ||
        meta.at("rows").get<Eigen::Index>() != refs[t].tensor->rows() ||
        meta.at("cols").get<Eigen::Index>() != refs[t].tensor->cols())
      throw DataError("load_checkpoint: tensor directory mismatch at " + refs[t].name);
    row_buf.resize(static_cast<std::size_t>(refs[t].tensor->cols()));
    for (Eigen::Index i = 0; i < refs[t].tensor->rows(); ++i) {
      in.read(reinterpret_cast<char*>(row_buf.data()),
              static_cast<std::streamsize>(row_buf.size() * sizeof(S)));
      for (Eigen::Index j = 0; j < refs[t].tensor->cols(); ++j)
        (*refs[t].tensor)(i, j) = row_buf[static_cast<std::size_t>(j)];
    }
  }
  if (!in) throw DataError("load_checkpoint: truncated tensor data in " + path);
  return params;
}

#define HIERATTN_INSTANTIATE_ENCODER(S)                                                        \
  template EncoderParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                 \
  template EncoderParams<S> zero_params<S>(const ModelConfig&);                                \
  template std::vector<TensorRef<S>> tensor_refs<S>(EncoderParams<S>&);                        \
  template EncoderInput<S> document_input<S>(const LinearDoc&, const ModelConfig&);            \
  template Mat<S> forward<S>(const EncoderParams<S>&, const ModelConfig&,                      \
                             const EncoderInput<S>&, ForwardCache<S>*, rng::Rng*);             \
  template S loss<S>(const Mat<S>&, int);                                                      \
  template void backward<S>(const EncoderParams<S>&, const ModelConfig&, const EncoderInput<S>&,\
                            int, const ForwardCache<S>&, S, EncoderParams<S>&);                \
  template Trace train<S>(EncoderParams<S>&, const ModelConfig&, const TrainConfig&,           \
                          const std::vector<Example<S>>&, const std::vector<Example<S>>&);     \
  template double evaluate<S>(const EncoderParams<S>&, const ModelConfig&,                     \
                              const std::vector<Example<S>>&);                                 \
  template void save_checkpoint<S>(const std::string&, const ModelConfig&,                     \
                                   const EncoderParams<S>&, const std::string&);               \
  template EncoderParams<S> load_checkpoint<S>(const std::string&, ModelConfig&);

HIERATTN_INSTANTIATE_ENCODER(float)
HIERATTN_INSTANTIATE_ENCODER(double)

#undef HIERATTN_INSTANTIATE_ENCODER

}  // namespace hierattn::encoder
