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

#include "crowdner/lstm.hpp"

#include <cmath>

namespace crowdner {

namespace {
template <typename S>
S sigmoid(S v) {
  return static_cast<S>(1) / (static_cast<S>(1) + std::exp(-v));
}
}  // namespace

template <typename S>
Mat<S> lstm_forward(const Mat<S>& x, const LstmWeights<S>& weights, bool reverse,
                    LstmTrace<S>* trace) {
  const long n = x.rows();
  const long h = weights.u.cols();
  if (weights.w.cols() != x.cols() || weights.w.rows() != 4 * h || weights.b.cols() != 4 * h) {
    throw UsageError("LSTM shape mismatch");
  }
  Mat<S> pre = x * weights.w.transpose();
  pre.rowwise() += weights.b.row(0);

  LstmTrace<S> local;
  LstmTrace<S>& t = trace ? *trace : local;
  t.gates.resize(n, 4 * h);
  t.cell.resize(n, h);
  t.tanh_cell.resize(n, h);
  t.hidden.resize(n, h);

  RowVec<S> h_prev = RowVec<S>::Zero(h);
  RowVec<S> c_prev = RowVec<S>::Zero(h);
  for (long step = 0; step < n; ++step) {
    const long i = reverse ? n - 1 - step : step;
    RowVec<S> z = pre.row(i);
    z.noalias() += h_prev * weights.u.transpose();
    auto g = t.gates.row(i);
    for (long k = 0; k < h; ++k) {
      g(k) = sigmoid(z(k));
      g(h + k) = sigmoid(z(h + k));
      g(2 * h + k) = std::tanh(z(2 * h + k));
      g(3 * h + k) = sigmoid(z(3 * h + k));
    }
    RowVec<S> c = g.segment(h, h).cwiseProduct(c_prev) + g.segment(0, h).cwiseProduct(g.segment(2 * h, h));
    RowVec<S> tc = c.unaryExpr([](S v) { return std::tanh(v); });
    t.cell.row(i) = c;
    t.tanh_cell.row(i) = tc;
    t.hidden.row(i) = g.segment(3 * h, h).cwiseProduct(tc);
    h_prev = t.hidden.row(i);
    c_prev = c;
  }
  return t.hidden;
}

template <typename S>
Mat<S> lstm_backward(const Mat<S>& x, const LstmWeights<S>& weights, bool reverse,
                     const LstmTrace<S>& trace, const Mat<S>& d_hidden, Mat<S>& d_w, Mat<S>& d_u,
                     Mat<S>& d_b) {
  const long n = x.rows();
  const long h = weights.u.cols();
  Mat<S> d_pre(n, 4 * h);
  RowVec<S> dh_next = RowVec<S>::Zero(h);
  RowVec<S> dc_next = RowVec<S>::Zero(h);
  for (long step = n - 1; step >= 0; --step) {
    const long i = reverse ? n - 1 - step : step;
    const long prev = reverse ? i + 1 : i - 1;
    const bool has_prev = step > 0;
    const auto g = trace.gates.row(i);
    RowVec<S> dh = d_hidden.row(i) + dh_next;
    RowVec<S> dc = dc_next;
    for (long k = 0; k < h; ++k) {
      const S tc = trace.tanh_cell(i, k);
      const S gi = g(k), gf = g(h + k), gg = g(2 * h + k), go = g(3 * h + k);
      const S c_prev = has_prev ? trace.cell(prev, k) : static_cast<S>(0);
      dc(k) += dh(k) * go * (static_cast<S>(1) - tc * tc);
      d_pre(i, k) = dc(k) * gg * gi * (static_cast<S>(1) - gi);
      d_pre(i, h + k) = dc(k) * c_prev * gf * (static_cast<S>(1) - gf);
      d_pre(i, 2 * h + k) = dc(k) * gi * (static_cast<S>(1) - gg * gg);
      d_pre(i, 3 * h + k) = dh(k) * tc * go * (static_cast<S>(1) - go);
      dc(k) *= gf;
    }
    if (has_prev) d_u.noalias() += d_pre.row(i).transpose() * trace.hidden.row(prev);
    dh_next.noalias() = d_pre.row(i) * weights.u;
    dc_next = dc;
  }
  d_w.noalias() += d_pre.transpose() * x;
  d_b.row(0) += d_pre.colwise().sum();
  return d_pre * weights.w;
}

template <typename S>
Mat<S> bilstm_encode(const Mat<S>& reps, const LstmWeights<S>& forward,
                     const LstmWeights<S>& backward) {
  const Mat<S> f = lstm_forward<S>(reps, forward, false, nullptr);
  const Mat<S> b = lstm_forward<S>(reps, backward, true, nullptr);
  Mat<S> out(reps.rows(), f.cols() + b.cols());
  out << f, b;
  return out;
}

#define CROWDNER_INSTANTIATE(S)                                                                 \
  template Mat<S> lstm_forward<S>(const Mat<S>&, const LstmWeights<S>&, bool, LstmTrace<S>*);   \
  template Mat<S> lstm_backward<S>(const Mat<S>&, const LstmWeights<S>&, bool,                  \
                                   const LstmTrace<S>&, const Mat<S>&, Mat<S>&, Mat<S>&,        \
                                   Mat<S>&);                                                    \
  template Mat<S> bilstm_encode<S>(const Mat<S>&, const LstmWeights<S>&, const LstmWeights<S>&);

CROWDNER_INSTANTIATE(float)
CROWDNER_INSTANTIATE(double)
#undef CROWDNER_INSTANTIATE

}  // namespace crowdner
