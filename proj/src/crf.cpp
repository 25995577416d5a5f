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

#include "crowdner/crf.hpp"

#include <cmath>
#include <limits>

namespace crowdner {

namespace {

template <typename S>
void check_shapes(const Mat<S>& o, const Mat<S>& trans) {
  if (o.rows() < 1 || o.cols() < 1) throw UsageError("CRF needs at least one position and one tag");
  if (trans.cols() != o.cols() || trans.rows() != o.cols() + 1) {
    throw UsageError("transition matrix must be (K+1) x K");
  }
}

template <typename S>
S log_sum_exp(const RowVec<S>& v) {
  const S mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

// alpha(i, t): log-sum of scores of all prefixes ending in t at position i.
template <typename S>
Mat<S> forward_table(const Mat<S>& o, const Mat<S>& trans) {
  const long n = o.rows();
  const long k = o.cols();
  Mat<S> alpha(n, k);
  alpha.row(0) = trans.row(k) + o.row(0);
  RowVec<S> tmp(k);
  for (long i = 1; i < n; ++i) {
    for (long t = 0; t < k; ++t) {
      tmp = alpha.row(i - 1) + trans.col(t).head(k).transpose();
      alpha(i, t) = log_sum_exp<S>(tmp) + o(i, t);
    }
  }
  return alpha;
}

template <typename S>
Mat<S> backward_table(const Mat<S>& o, const Mat<S>& trans) {
  const long n = o.rows();
  const long k = o.cols();
  Mat<S> beta = Mat<S>::Zero(n, k);
  RowVec<S> tmp(k);
  for (long i = n - 2; i >= 0; --i) {
    for (long s = 0; s < k; ++s) {
      tmp = trans.row(s) + o.row(i + 1) + beta.row(i + 1);
      beta(i, s) = log_sum_exp<S>(tmp);
    }
  }
  return beta;
}

}  // namespace

template <typename S>
Mat<S> emission_scores(const Mat<S>& features, const Mat<S>& w, const Mat<S>& b) {
  if (w.cols() != features.cols() || b.rows() != 1 || b.cols() != w.rows()) {
    throw UsageError("emission projection shape mismatch");
  }
  Mat<S> o = features * w.transpose();
  o.rowwise() += b.row(0);
  return o;
}

template <typename S>
S sequence_score(const Mat<S>& o, const Mat<S>& trans, std::span<const int> tags) {
  check_shapes(o, trans);
  const long k = o.cols();
  if (static_cast<long>(tags.size()) != o.rows()) throw UsageError("tag sequence length mismatch");
  S score = 0;
  long prev = k;
  for (long i = 0; i < o.rows(); ++i) {
    const int t = tags[static_cast<std::size_t>(i)];
    if (t < 0 || t >= k) throw UsageError("tag index out of range");
    score = (score + trans(prev, t)) + o(i, t);
    prev = t;
  }
  return score;
}

template <typename S>
S log_partition(const Mat<S>& o, const Mat<S>& trans) {
  check_shapes(o, trans);
  const Mat<S> alpha = forward_table(o, trans);
  return log_sum_exp<S>(alpha.row(o.rows() - 1));
}

template <typename S>
S nll_loss(const Mat<S>& o, const Mat<S>& trans, std::span<const int> gold) {
  const S nll = log_partition(o, trans) - sequence_score(o, trans, gold);
  return nll < S(0) ? S(0) : nll;
}

template <typename S>
Mat<S> tag_marginals(const Mat<S>& o, const Mat<S>& trans) {
  check_shapes(o, trans);
  const Mat<S> alpha = forward_table(o, trans);
  const Mat<S> beta = backward_table(o, trans);
  const S log_z = log_sum_exp<S>(alpha.row(o.rows() - 1));
  return ((alpha + beta).array() - log_z).exp().matrix();
}

template <typename S>
S nll_gradient(const Mat<S>& o, const Mat<S>& trans, std::span<const int> gold, Mat<S>& d_o,
               Mat<S>& d_trans) {
  const S gold_score = sequence_score(o, trans, gold);
  const long n = o.rows();
  const long k = o.cols();
  const Mat<S> alpha = forward_table(o, trans);
  const Mat<S> beta = backward_table(o, trans);
  const S log_z = log_sum_exp<S>(alpha.row(n - 1));

  d_o = ((alpha + beta).array() - log_z).exp().matrix();
  d_trans = Mat<S>::Zero(k + 1, k);
  d_trans.row(k) = d_o.row(0);
  for (long i = 1; i < n; ++i) {
    for (long s = 0; s < k; ++s) {
      for (long t = 0; t < k; ++t) {
        d_trans(s, t) += std::exp(alpha(i - 1, s) + trans(s, t) + o(i, t) + beta(i, t) - log_z);
      }
    }
  }
  long prev = k;
  for (long i = 0; i < n; ++i) {
    const int t = gold[static_cast<std::size_t>(i)];
    d_o(i, t) -= 1;
    d_trans(prev, t) -= 1;
    prev = t;
  }
  const S nll = log_z - gold_score;
  return nll < S(0) ? S(0) : nll;
}

template <typename S>
ViterbiResult<S> viterbi_decode(const Mat<S>& o, const Mat<S>& trans) {
  check_shapes(o, trans);
  const long n = o.rows();
  const long k = o.cols();
  Mat<S> delta(n, k);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, k);
  delta.row(0) = trans.row(k) + o.row(0);
  for (long i = 1; i < n; ++i) {
    for (long t = 0; t < k; ++t) {
      S best = -std::numeric_limits<S>::infinity();
      int arg = 0;
      for (long s = 0; s < k; ++s) {
        const S cand = delta(i - 1, s) + trans(s, t);
        if (cand > best) {
          best = cand;
          arg = static_cast<int>(s);
        }
      }
      delta(i, t) = best + o(i, t);
      back(i, t) = arg;
    }
  }
  ViterbiResult<S> result;
  result.tags.assign(static_cast<std::size_t>(n), 0);
  int last = 0;
  for (long t = 1; t < k; ++t) {
    if (delta(n - 1, t) > delta(n - 1, last)) last = static_cast<int>(t);
  }
  result.score = delta(n - 1, last);
  result.tags[static_cast<std::size_t>(n - 1)] = last;
  for (long i = n - 1; i > 0; --i) {
    result.tags[static_cast<std::size_t>(i - 1)] = back(i, result.tags[static_cast<std::size_t>(i)]);
  }
  return result;
}

#define CROWDNER_INSTANTIATE(S)                                                                 \
  template Mat<S> emission_scores<S>(const Mat<S>&, const Mat<S>&, const Mat<S>&);              \
  template S sequence_score<S>(const Mat<S>&, const Mat<S>&, std::span<const int>);             \
  template S log_partition<S>(const Mat<S>&, const Mat<S>&);                                    \
  template S nll_loss<S>(const Mat<S>&, const Mat<S>&, std::span<const int>);                   \
  template S nll_gradient<S>(const Mat<S>&, const Mat<S>&, std::span<const int>, Mat<S>&,       \
                             Mat<S>&);                                                          \
  template Mat<S> tag_marginals<S>(const Mat<S>&, const Mat<S>&);                               \
  template struct ViterbiResult<S>;                                                             \
  template ViterbiResult<S> viterbi_decode<S>(const Mat<S>&, const Mat<S>&);

CROWDNER_INSTANTIATE(float)
CROWDNER_INSTANTIATE(double)
#undef CROWDNER_INSTANTIATE

}  // namespace crowdner
