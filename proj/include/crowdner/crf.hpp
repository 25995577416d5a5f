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

#pragma once

#include <span>
#include <vector>

#include "crowdner/common.hpp"

namespace crowdner {

// Linear-chain CRF over K tags. Emissions `o` are n x K; transitions `trans`
// are (K+1) x K with row K holding the scores out of the virtual start state.
// There is no end-of-sequence transition.

/// o_i = W h_i + b for every position; W is K x 2h, b is 1 x K.
template <typename S>
Mat<S> emission_scores(const Mat<S>& features, const Mat<S>& w, const Mat<S>& b);

template <typename S>
S sequence_score(const Mat<S>& o, const Mat<S>& trans, std::span<const int> tags);

/// log of the sum over all K^n tag sequences of exp(score), by the
/// max-shifted log-space forward recursion.
template <typename S>
S log_partition(const Mat<S>& o, const Mat<S>& trans);

/// log_partition - sequence_score(gold), clamped at zero against rounding.
template <typename S>
S nll_loss(const Mat<S>& o, const Mat<S>& trans, std::span<const int> gold);

/// Loss plus its gradients: d_o = marginals - one_hot(gold), d_trans =
/// expected minus observed transition counts. Outputs are overwritten.
template <typename S>
S nll_gradient(const Mat<S>& o, const Mat<S>& trans, std::span<const int> gold, Mat<S>& d_o,
               Mat<S>& d_trans);

/// Per-position tag marginals (n x K).
template <typename S>
Mat<S> tag_marginals(const Mat<S>& o, const Mat<S>& trans);

template <typename S>
struct ViterbiResult {
  std::vector<int> tags;
  S score;
};

/// Highest-scoring sequence. Ties go to the lowest tag index, both for the
/// final state and at every back-pointer.
template <typename S>
ViterbiResult<S> viterbi_decode(const Mat<S>& o, const Mat<S>& trans);

}  // namespace crowdner
