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

/// Weights of one LSTM direction. Gate blocks are ordered input, forget,
/// cell candidate, output.
template <typename S>
struct LstmWeights {
  const Mat<S>& w;  // 4h x d_in
  const Mat<S>& u;  // 4h x h
  const Mat<S>& b;  // 1 x 4h
};

template <typename S>
struct LstmTrace {
  Mat<S> gates;   // n x 4h, post-activation
  Mat<S> cell;    // n x h
  Mat<S> tanh_cell;
  Mat<S> hidden;  // n x h, indexed by position
};

/// Runs one direction from zero initial states; `reverse` scans right to left.
template <typename S>
Mat<S> lstm_forward(const Mat<S>& x, const LstmWeights<S>& weights, bool reverse,
                    LstmTrace<S>* trace);

/// Accumulates weight gradients and returns d(loss)/d(x).
template <typename S>
Mat<S> lstm_backward(const Mat<S>& x, const LstmWeights<S>& weights, bool reverse,
                     const LstmTrace<S>& trace, const Mat<S>& d_hidden, Mat<S>& d_w, Mat<S>& d_u,
                     Mat<S>& d_b);

/// Concatenation [forward | backward] per position: n x 2h.
template <typename S>
Mat<S> bilstm_encode(const Mat<S>& reps, const LstmWeights<S>& forward,
                     const LstmWeights<S>& backward);

}  // namespace crowdner
