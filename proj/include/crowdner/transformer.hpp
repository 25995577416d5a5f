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

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crowdner/adapter.hpp"
#include "crowdner/common.hpp"

namespace crowdner {

struct EncoderDims {
  int vocab_size = 2;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 2;
  int d_ff = 128;
  int max_len = 128;

  void validate() const;
  bool operator==(const EncoderDims&) const = default;
};

/// Weights of one post-norm transformer layer. Biases and layer-norm
/// parameters are 1 x width matrices.
template <typename S>
struct EncoderLayer {
  Mat<S> wq, wk, wv, wo;
  Mat<S> bq, bk, bv, bo;
  Mat<S> ln1_gamma, ln1_beta;
  Mat<S> w_ff1, b_ff1, w_ff2, b_ff2;
  Mat<S> ln2_gamma, ln2_beta;
};

/// Mini transformer standing in for a pretrained encoder. Weights are set once
/// by `init` (or a checkpoint load) and never updated by training.
template <typename S>
class FrozenEncoder {
 public:
  FrozenEncoder() = default;

  /// Token embeddings ~ N(0, 1); every projection ~ N(0, 0.02); zero biases;
  /// unit layer-norm gains.
  static FrozenEncoder init(const EncoderDims& dims, std::uint64_t seed);

  const EncoderDims& dims() const { return dims_; }
  const Mat<S>& embedding() const { return embedding_; }
  const std::vector<EncoderLayer<S>>& layers() const { return layers_; }
  const Mat<S>& positions() const { return positions_; }

  /// Stable tensor names in serialization order.
  std::vector<std::pair<std::string, const Mat<S>*>> tensors() const;
  /// Writable access for checkpoint loading only.
  std::vector<std::pair<std::string, Mat<S>*>> mutable_tensors();
  static FrozenEncoder empty(const EncoderDims& dims);

  /// CRC-32 over all weights; used to verify frozen-ness.
  std::uint32_t checksum() const;

  template <typename T>
  FrozenEncoder<T> cast() const;

 private:
  template <typename>
  friend class FrozenEncoder;

  EncoderDims dims_;
  Mat<S> embedding_;
  Mat<S> positions_;
  std::vector<EncoderLayer<S>> layers_;
};

/// Everything the backward pass needs from one layer's forward pass.
template <typename S>
struct LayerTrace {
  Mat<S> x_in;
  Mat<S> q, k, v;
  std::vector<Mat<S>> probs;  // per head, n x n
  Mat<S> attn;                // attention sub-layer output (adapter input)
  Mat<S> attn_pre;            // adapter pre-activation
  Mat<S> ln1_hat;
  Vec<S> ln1_rstd;
  Mat<S> ff_pre;              // n x d_ff
  Mat<S> ff;                  // feed-forward output (adapter input)
  Mat<S> ff_pre_adapter;
  Mat<S> ln2_hat;
  Vec<S> ln2_rstd;
};

template <typename S>
struct EncoderTrace {
  std::vector<LayerTrace<S>> layers;
};

/// Runs the encoder over token ids. `adapters` points at a packed vector laid
/// out by `manifest`; null runs the plain encoder. Throws UsageError when the
/// sequence is empty or longer than the position table.
template <typename S>
Mat<S> encoder_forward(const FrozenEncoder<S>& encoder, std::span<const int> ids,
                       const S* adapters, const ParamManifest& manifest, EncoderTrace<S>* trace);

/// Back-propagates d(loss)/d(output) and accumulates adapter gradients into
/// `d_adapters` (same layout as the packed vector). Encoder weights receive
/// no gradient.
template <typename S>
void encoder_backward(const FrozenEncoder<S>& encoder, const EncoderTrace<S>& trace,
                      const S* adapters, const ParamManifest& manifest, const Mat<S>& d_out,
                      S* d_adapters);

/// Adapter-free forward pass.
template <typename S>
Mat<S> base_encode(std::span<const int> ids, const FrozenEncoder<S>& encoder);

}  // namespace crowdner
