// Copyright 2026 The CrowdNER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crowdner/transformer.hpp"

#include <zlib.h>

#include <cmath>
#include <random>

namespace crowdner {

namespace {

constexpr double kWeightStd = 0.02;
constexpr double kTokenStd = 1.0;
constexpr double kLayerNormEps = 1e-5;

template <typename S>
Mat<S> normal(long rows, long cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat<S> m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
  return m;
}

template <typename S>
Mat<S> sinusoid_table(int max_len, int d_model) {
  Mat<S> p(max_len, d_model);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d_model);
      const double angle = pos * rate;
      p(pos, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return p;
}

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta, Mat<S>& hat,
                  Vec<S>& rstd) {
  const long n = x.rows();
  const long d = x.cols();
  hat.resize(n, d);
  rstd.resize(n);
  for (long i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().mean();
    rstd(i) = static_cast<S>(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    hat.row(i) = (x.row(i).array() - mean) * rstd(i);
  }
  Mat<S> y = hat.array().rowwise() * gamma.row(0).array();
  y.rowwise() += beta.row(0);
  return y;
}

template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const Mat<S>& gamma, const Mat<S>& hat,
                           const Vec<S>& rstd) {
  Mat<S> dhat = dy.array().rowwise() * gamma.row(0).array();
  Mat<S> dx(dy.rows(), dy.cols());
  for (long i = 0; i < dy.rows(); ++i) {
    const S mean_d = dhat.row(i).mean();
    const S mean_dh = dhat.row(i).cwiseProduct(hat.row(i)).mean();
    dx.row(i) = (dhat.row(i).array() - mean_d - hat.row(i).array() * mean_dh) * rstd(i);
  }
  return dx;
}

template <typename S>
Mat<S> affine(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b) {
  Mat<S> y = x * w.transpose();
  y.rowwise() += b.row(0);
  return y;
}

template <typename S>
void softmax_rows(Mat<S>& m) {
  for (long i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

}  // namespace

void EncoderDims::validate() const {
  if (vocab_size < 2 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_len < 1) {
    throw UsageError("encoder dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw UsageError("d_model must be divisible by n_heads");
}

template <typename S>
FrozenEncoder<S> FrozenEncoder<S>::init(const EncoderDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  FrozenEncoder enc = empty(dims);
  enc.embedding_ = normal<S>(dims.vocab_size, dims.d_model, kTokenStd, rng);
  for (auto& layer : enc.layers_) {
    layer.wq = normal<S>(dims.d_model, dims.d_model, kWeightStd, rng);
    layer.wk = normal<S>(dims.d_model, dims.d_model, kWeightStd, rng);
    layer.wv = normal<S>(dims.d_model, dims.d_model, kWeightStd, rng);
    layer.wo = normal<S>(dims.d_model, dims.d_model, kWeightStd, rng);
    layer.w_ff1 = normal<S>(dims.d_ff, dims.d_model, kWeightStd, rng);
    layer.w_ff2 = normal<S>(dims.d_model, dims.d_ff, kWeightStd, rng);
  }
  return enc;
}

template <typename S>
FrozenEncoder<S> FrozenEncoder<S>::empty(const EncoderDims& dims) {
  dims.validate();
  FrozenEncoder enc;
  enc.dims_ = dims;
  const int d = dims.d_model;
  enc.embedding_ = Mat<S>::Zero(dims.vocab_size, d);
  enc.positions_ = sinusoid_table<S>(dims.max_len, d);
  enc.layers_.resize(static_cast<std::size_t>(dims.n_layers));
  for (auto& l : enc.layers_) {
    l.wq = l.wk = l.wv = l.wo = Mat<S>::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = Mat<S>::Zero(1, d);
    l.ln1_gamma = l.ln2_gamma = Mat<S>::Ones(1, d);
    l.ln1_beta = l.ln2_beta = Mat<S>::Zero(1, d);
    l.w_ff1 = Mat<S>::Zero(dims.d_ff, d);
    l.b_ff1 = Mat<S>::Zero(1, dims.d_ff);
    l.w_ff2 = Mat<S>::Zero(d, dims.d_ff);
    l.b_ff2 = Mat<S>::Zero(1, d);
  }
  return enc;
}

template <typename S>
std::vector<std::pair<std::string, const Mat<S>*>> FrozenEncoder<S>::tensors() const {
  std::vector<std::pair<std::string, const Mat<S>*>> out;
  for (auto& [name, ptr] : const_cast<FrozenEncoder*>(this)->mutable_tensors()) {
    out.emplace_back(name, ptr);
  }
  return out;
}

template <typename S>
std::vector<std::pair<std::string, Mat<S>*>> FrozenEncoder<S>::mutable_tensors() {
  std::vector<std::pair<std::string, Mat<S>*>> out{{"encoder.embedding", &embedding_}};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    const std::string p = "encoder.layer" + std::to_string(i) + ".";
    for (auto [name, m] : std::initializer_list<std::pair<const char*, Mat<S>*>>{
             {"wq", &l.wq}, {"wk", &l.wk}, {"wv", &l.wv}, {"wo", &l.wo},
             {"bq", &l.bq}, {"bk", &l.bk}, {"bv", &l.bv}, {"bo", &l.bo},
             {"ln1_gamma", &l.ln1_gamma}, {"ln1_beta", &l.ln1_beta},
             {"w_ff1", &l.w_ff1}, {"b_ff1", &l.b_ff1}, {"w_ff2", &l.w_ff2}, {"b_ff2", &l.b_ff2},
             {"ln2_gamma", &l.ln2_gamma}, {"ln2_beta", &l.ln2_beta}}) {
      out.emplace_back(p + name, m);
    }
  }
  return out;
}

template <typename S>
std::uint32_t FrozenEncoder<S>::checksum() const {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& [name, m] : tensors()) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(m->data()),
                static_cast<uInt>(static_cast<std::size_t>(m->size()) * sizeof(S)));
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename S>
template <typename T>
FrozenEncoder<T> FrozenEncoder<S>::cast() const {
  FrozenEncoder<T> out = FrozenEncoder<T>::empty(dims_);
  auto src = tensors();
  auto dst = out.mutable_tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<T>();
  return out;
}

template <typename S>
Mat<S> encoder_forward(const FrozenEncoder<S>& encoder, std::span<const int> ids,
                       const S* adapters, const ParamManifest& manifest, EncoderTrace<S>* trace) {
  const auto& dims = encoder.dims();
  const long n = static_cast<long>(ids.size());
  if (n < 1) throw UsageError("cannot encode an empty sequence");
  if (n > dims.max_len) {
    throw UsageError("sequence length " + std::to_string(n) + " exceeds the position table (" +
                     std::to_string(dims.max_len) + ")");
  }
  const int d = dims.d_model;
  const int heads = dims.n_heads;
  const int dh = d / heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  Mat<S> x(n, d);
  for (long i = 0; i < n; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= dims.vocab_size) throw UsageError("token id out of range");
    x.row(i) = encoder.embedding().row(id) + encoder.positions().row(i);
  }
  if (trace) trace->layers.assign(encoder.layers().size(), {});

  for (std::size_t li = 0; li < encoder.layers().size(); ++li) {
    const auto& L = encoder.layers()[li];
    LayerTrace<S> local;
    LayerTrace<S>& t = trace ? trace->layers[li] : local;
    t.x_in = x;
    t.q = affine(x, L.wq, L.bq);
    t.k = affine(x, L.wk, L.bk);
    t.v = affine(x, L.wv, L.bv);
    Mat<S> ctx(n, d);
    t.probs.resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Mat<S> s = t.q.middleCols(h * dh, dh) * t.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(s);
      ctx.middleCols(h * dh, dh).noalias() = s * t.v.middleCols(h * dh, dh);
      t.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    t.attn = affine(ctx, L.wo, L.bo);

    const int attn_idx = adapters ? manifest.adapter_index(static_cast<int>(li), AdapterSlot::kAttention) : -1;
    Mat<S> attn_out = attn_idx >= 0
        ? adapter_forward<S>(t.attn, AdapterRef<S>(adapters, manifest, attn_idx), &t.attn_pre)
        : t.attn;
    Mat<S> x1 = layer_norm<S>(x + attn_out, L.ln1_gamma, L.ln1_beta, t.ln1_hat, t.ln1_rstd);

    t.ff_pre = affine(x1, L.w_ff1, L.b_ff1);
    t.ff = affine<S>(t.ff_pre.unaryExpr([](S v) { return gelu(v); }), L.w_ff2, L.b_ff2);
    const int ff_idx = adapters ? manifest.adapter_index(static_cast<int>(li), AdapterSlot::kFeedForward) : -1;
    Mat<S> ff_out = ff_idx >= 0
        ? adapter_forward<S>(t.ff, AdapterRef<S>(adapters, manifest, ff_idx), &t.ff_pre_adapter)
        : t.ff;
    x = layer_norm<S>(x1 + ff_out, L.ln2_gamma, L.ln2_beta, t.ln2_hat, t.ln2_rstd);
  }
  return x;
}

template <typename S>
void encoder_backward(const FrozenEncoder<S>& encoder, const EncoderTrace<S>& trace,
                      const S* adapters, const ParamManifest& manifest, const Mat<S>& d_out,
                      S* d_adapters) {
  const auto& dims = encoder.dims();
  const int d = dims.d_model;
  const int heads = dims.n_heads;
  const int dh = d / heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  const int lowest = manifest.num_adapters() > 0 ? manifest.first_adapted_layer() : dims.n_layers;

  Mat<S> dx = d_out;
  for (int li = dims.n_layers - 1; li >= lowest; --li) {
    const auto& L = encoder.layers()[static_cast<std::size_t>(li)];
    const auto& t = trace.layers[static_cast<std::size_t>(li)];

    Mat<S> d_sum2 = layer_norm_backward<S>(dx, L.ln2_gamma, t.ln2_hat, t.ln2_rstd);
    Mat<S> d_ff = d_sum2;
    if (const int a = manifest.adapter_index(li, AdapterSlot::kFeedForward); a >= 0) {
      AdapterGradRef<S> g(d_adapters, manifest, a);
      d_ff = adapter_backward<S>(t.ff, t.ff_pre_adapter, AdapterRef<S>(adapters, manifest, a), d_sum2, g);
    }
    Mat<S> d_hidden = (d_ff * L.w_ff2).cwiseProduct(t.ff_pre.unaryExpr([](S v) { return gelu_grad(v); }));
    Mat<S> dx1 = d_sum2;
    dx1.noalias() += d_hidden * L.w_ff1;

    Mat<S> d_sum1 = layer_norm_backward<S>(dx1, L.ln1_gamma, t.ln1_hat, t.ln1_rstd);
    Mat<S> d_attn = d_sum1;
    if (const int a = manifest.adapter_index(li, AdapterSlot::kAttention); a >= 0) {
      AdapterGradRef<S> g(d_adapters, manifest, a);
      d_attn = adapter_backward<S>(t.attn, t.attn_pre, AdapterRef<S>(adapters, manifest, a), d_sum1, g);
    }
    if (li == lowest) break;  // nothing below needs a gradient

    const Mat<S> d_ctx = d_attn * L.wo;
    Mat<S> dq(d_ctx.rows(), d), dk(d_ctx.rows(), d), dv(d_ctx.rows(), d);
    for (int h = 0; h < heads; ++h) {
      const Mat<S>& p = t.probs[static_cast<std::size_t>(h)];
      const auto dc = d_ctx.middleCols(h * dh, dh);
      Mat<S> dp = dc * t.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dc;
      Vec<S> row_dot = dp.cwiseProduct(p).rowwise().sum();
      Mat<S> ds = (p.array() * (dp.colwise() - row_dot).array()) * scale;
      dq.middleCols(h * dh, dh).noalias() = ds * t.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * t.q.middleCols(h * dh, dh);
    }
    dx = d_sum1;
    dx.noalias() += dq * L.wq;
    dx.noalias() += dk * L.wk;
    dx.noalias() += dv * L.wv;
  }
}

template <typename S>
Mat<S> base_encode(std::span<const int> ids, const FrozenEncoder<S>& encoder) {
  return encoder_forward<S>(encoder, ids, nullptr, ParamManifest{}, nullptr);
}

#define CROWDNER_INSTANTIATE(S)                                                               \
  template class FrozenEncoder<S>;                                                            \
  template Mat<S> encoder_forward<S>(const FrozenEncoder<S>&, std::span<const int>, const S*, \
                                     const ParamManifest&, EncoderTrace<S>*);                 \
  template void encoder_backward<S>(const FrozenEncoder<S>&, const EncoderTrace<S>&, const S*, \
                                    const ParamManifest&, const Mat<S>&, S*);                 \
  template Mat<S> base_encode<S>(std::span<const int>, const FrozenEncoder<S>&);

CROWDNER_INSTANTIATE(float)
CROWDNER_INSTANTIATE(double)
#undef CROWDNER_INSTANTIATE

template FrozenEncoder<double> FrozenEncoder<float>::cast<double>() const;
template FrozenEncoder<float> FrozenEncoder<double>::cast<float>() const;
template FrozenEncoder<float> FrozenEncoder<float>::cast<float>() const;
template FrozenEncoder<double> FrozenEncoder<double>::cast<double>() const;

}  // namespace crowdner
