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

#include "crowdner/network.hpp"

#include <cmath>
#include <random>

#include "crowdner/crf.hpp"

namespace crowdner {

namespace {

constexpr double kAnnotatorStd = 0.1;
constexpr double kThetaStd = 0.1;

template <typename S>
Mat<S> normal(long rows, long cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat<S> m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
  return m;
}

template <typename S>
Mat<S> uniform(long rows, long cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat<S> m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
  return m;
}

}  // namespace

void ModelDims::validate() const {
  encoder.validate();
  if (d_adapter < 1 || d_ann < 1 || d_h < 1 || num_tags < 1 || annotator_rows < 1) {
    throw UsageError("model dimensions must be positive");
  }
  if (num_adapted_layers < 0 || num_adapted_layers > encoder.n_layers) {
    throw UsageError("num_adapted_layers must lie in [0, n_layers]");
  }
}

template <typename S>
const std::array<const char*, Trainables<S>::kCount>& Trainables<S>::names() {
  static const std::array<const char*, kCount> kNames = {
      "pgn.theta", "annotator.embeddings", "lstm.fw.w", "lstm.fw.u", "lstm.fw.b", "lstm.bw.w",
      "lstm.bw.u", "lstm.bw.b",            "crf.w",     "crf.b",     "crf.transitions"};
  return kNames;
}

template <typename S>
std::array<Mat<S>*, Trainables<S>::kCount> Trainables<S>::tensors() {
  return {&theta, &annotators, &fw_w, &fw_u, &fw_b, &bw_w, &bw_u, &bw_b, &crf_w, &crf_b, &crf_t};
}

template <typename S>
std::array<const Mat<S>*, Trainables<S>::kCount> Trainables<S>::tensors() const {
  return {&theta, &annotators, &fw_w, &fw_u, &fw_b, &bw_w, &bw_u, &bw_b, &crf_w, &crf_b, &crf_t};
}

template <typename S>
Trainables<S> Trainables<S>::zeros_like() const {
  Trainables out;
  auto dst = out.tensors();
  auto src = tensors();
  for (std::size_t i = 0; i < kCount; ++i) *dst[i] = Mat<S>::Zero(src[i]->rows(), src[i]->cols());
  return out;
}

template <typename S>
void Trainables<S>::set_zero() {
  for (auto* m : tensors()) m->setZero();
}

template <typename S>
double Trainables<S>::norm() const {
  double sq = 0.0;
  for (const auto* m : tensors()) sq += m->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename S>
template <typename T>
Trainables<T> Trainables<S>::cast() const {
  Trainables<T> out;
  auto dst = out.tensors();
  auto src = tensors();
  for (std::size_t i = 0; i < kCount; ++i) *dst[i] = src[i]->template cast<T>();
  return out;
}

template <typename S>
Network<S> Network<S>::init(const ModelDims& dims, std::uint64_t encoder_seed, std::uint64_t seed) {
  dims.validate();
  Network net;
  net.dims = dims;
  net.encoder = FrozenEncoder<S>::init(dims.encoder, encoder_seed);
  net.manifest = ParamManifest(dims.encoder.n_layers, dims.num_adapted_layers,
                               dims.encoder.d_model, dims.d_adapter);
  std::mt19937_64 rng(seed);
  auto& p = net.params;
  const long v = static_cast<long>(net.manifest.size());
  const long h = dims.d_h;
  const long d = dims.encoder.d_model;
  const long k = dims.num_tags;
  p.theta = normal<S>(v, dims.d_ann, kThetaStd, rng);
  p.annotators = normal<S>(dims.annotator_rows, dims.d_ann, kAnnotatorStd, rng);
  const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(h));
  p.fw_w = uniform<S>(4 * h, d, lstm_bound, rng);
  p.fw_u = uniform<S>(4 * h, h, lstm_bound, rng);
  p.fw_b = uniform<S>(1, 4 * h, lstm_bound, rng);
  p.bw_w = uniform<S>(4 * h, d, lstm_bound, rng);
  p.bw_u = uniform<S>(4 * h, h, lstm_bound, rng);
  p.bw_b = uniform<S>(1, 4 * h, lstm_bound, rng);
  p.crf_w = uniform<S>(k, 2 * h, 1.0 / std::sqrt(static_cast<double>(2 * h)), rng);
  p.crf_b = Mat<S>::Zero(1, k);
  p.crf_t = Mat<S>::Zero(k + 1, k);
  return net;
}

template <typename S>
Vec<S> Network<S>::annotator_embedding(int row) const {
  if (row < 0 || row >= params.annotators.rows()) throw UsageError("annotator row out of range");
  return params.annotators.row(row).transpose();
}

template <typename S>
template <typename T>
Network<T> Network<S>::cast() const {
  Network<T> out;
  out.dims = dims;
  out.encoder = encoder.template cast<T>();
  out.manifest = manifest;
  out.params = params.template cast<T>();
  return out;
}

template <typename S>
Mat<S> represent_with(const Network<S>& net, std::span<const int> ids, const Vec<S>& adapters) {
  if (static_cast<std::size_t>(adapters.size()) != net.manifest.size()) {
    throw UsageError("adapter vector does not match the manifest");
  }
  return encoder_forward<S>(net.encoder, ids, adapters.data(), net.manifest, nullptr);
}

template <typename S>
Mat<S> represent(const Network<S>& net, std::span<const int> ids, const Vec<S>& embedding) {
  return represent_with(net, ids, pgn_generate<S>(embedding, net.params.theta));
}

template <typename S>
Mat<S> emissions(const Network<S>& net, const Mat<S>& reps) {
  const Mat<S> feats = bilstm_encode<S>(reps, net.forward_lstm(), net.backward_lstm());
  return emission_scores<S>(feats, net.params.crf_w, net.params.crf_b);
}

template <typename S>
std::vector<int> decode(const Network<S>& net, std::span<const int> ids, const Vec<S>& adapters) {
  const Mat<S> o = emissions(net, represent_with(net, ids, adapters));
  return viterbi_decode<S>(o, net.params.crf_t).tags;
}

template <typename S>
S instance_loss(const Network<S>& net, const EncodedInstance& inst, const DropoutMask& mask,
                Trainables<S>* grads, S weight) {
  const auto& p = net.params;
  const Vec<S> e = net.annotator_embedding(inst.annotator_row);
  const Vec<S> adapters = pgn_generate<S>(e, p.theta);

  EncoderTrace<S> enc_trace;
  const Mat<S> x = encoder_forward<S>(net.encoder, inst.tokens, adapters.data(), net.manifest,
                                      grads ? &enc_trace : nullptr);
  Mat<S> reps = x;
  const bool dropout = !mask.keep.empty();
  if (dropout) {
    if (mask.keep.size() != inst.tokens.size()) throw UsageError("dropout mask length mismatch");
    for (long i = 0; i < reps.rows(); ++i) {
      reps.row(i) *= mask.keep[static_cast<std::size_t>(i)] ? static_cast<S>(mask.scale) : S(0);
    }
  }

  LstmTrace<S> fw_trace, bw_trace;
  const Mat<S> hf = lstm_forward<S>(reps, net.forward_lstm(), false, &fw_trace);
  const Mat<S> hb = lstm_forward<S>(reps, net.backward_lstm(), true, &bw_trace);
  Mat<S> feats(reps.rows(), hf.cols() + hb.cols());
  feats << hf, hb;
  const Mat<S> o = emission_scores<S>(feats, p.crf_w, p.crf_b);

  if (!grads) return nll_loss<S>(o, p.crf_t, inst.tags);

  Mat<S> d_o, d_t;
  const S loss = nll_gradient<S>(o, p.crf_t, inst.tags, d_o, d_t);
  if (!std::isfinite(static_cast<double>(loss))) return loss;
  d_o *= weight;
  grads->crf_t.noalias() += weight * d_t;
  grads->crf_w.noalias() += d_o.transpose() * feats;
  grads->crf_b.row(0) += d_o.colwise().sum();
  const Mat<S> d_feats = d_o * p.crf_w;
  const long h = hf.cols();
  Mat<S> d_reps = lstm_backward<S>(reps, net.forward_lstm(), false, fw_trace, d_feats.leftCols(h),
                                   grads->fw_w, grads->fw_u, grads->fw_b);
  d_reps += lstm_backward<S>(reps, net.backward_lstm(), true, bw_trace, d_feats.rightCols(h),
                             grads->bw_w, grads->bw_u, grads->bw_b);
  if (dropout) {
    for (long i = 0; i < d_reps.rows(); ++i) {
      d_reps.row(i) *= mask.keep[static_cast<std::size_t>(i)] ? static_cast<S>(mask.scale) : S(0);
    }
  }
  Vec<S> d_adapters = Vec<S>::Zero(adapters.size());
  encoder_backward<S>(net.encoder, enc_trace, adapters.data(), net.manifest, d_reps, d_adapters.data());
  grads->theta.noalias() += d_adapters * e.transpose();
  grads->annotators.row(inst.annotator_row).noalias() += (p.theta.transpose() * d_adapters).transpose();
  return loss;
}

#define CROWDNER_INSTANTIATE(S)                                                                 \
  template struct Trainables<S>;                                                                \
  template struct Network<S>;                                                                   \
  template Mat<S> represent<S>(const Network<S>&, std::span<const int>, const Vec<S>&);         \
  template Mat<S> represent_with<S>(const Network<S>&, std::span<const int>, const Vec<S>&);    \
  template Mat<S> emissions<S>(const Network<S>&, const Mat<S>&);                               \
  template std::vector<int> decode<S>(const Network<S>&, std::span<const int>, const Vec<S>&);  \
  template S instance_loss<S>(const Network<S>&, const EncodedInstance&, const DropoutMask&,    \
                              Trainables<S>*, S);

CROWDNER_INSTANTIATE(float)
CROWDNER_INSTANTIATE(double)
#undef CROWDNER_INSTANTIATE

template Trainables<double> Trainables<float>::cast<double>() const;
template Trainables<float> Trainables<double>::cast<float>() const;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;

}  // namespace crowdner
