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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdner/adapter.hpp"
#include "crowdner/common.hpp"
#include "crowdner/lstm.hpp"
#include "crowdner/transformer.hpp"

namespace crowdner {

struct ModelDims {
  EncoderDims encoder;
  int d_adapter = 16;
  int d_ann = 8;
  int d_h = 64;
  int num_adapted_layers = 2;
  int num_tags = 1;
  int annotator_rows = 1;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

/// Every trainable tensor. The same struct carries gradients and optimizer
/// moments.
template <typename S>
struct Trainables {
  static constexpr std::size_t kCount = 11;

  Mat<S> theta;       // |V| x d_ann  (parameter generation network)
  Mat<S> annotators;  // rows x d_ann
  Mat<S> fw_w, fw_u, fw_b;
  Mat<S> bw_w, bw_u, bw_b;
  Mat<S> crf_w;       // K x 2h
  Mat<S> crf_b;       // 1 x K
  Mat<S> crf_t;       // (K+1) x K

  static const std::array<const char*, kCount>& names();
  std::array<Mat<S>*, kCount> tensors();
  std::array<const Mat<S>*, kCount> tensors() const;

  Trainables zeros_like() const;
  void set_zero();
  /// Global L2 norm over all tensors.
  double norm() const;

  template <typename T>
  Trainables<T> cast() const;

  bool operator==(const Trainables&) const = default;
};

/// Frozen encoder + PGN-generated adapters + BiLSTM + CRF.
template <typename S>
struct Network {
  ModelDims dims;
  FrozenEncoder<S> encoder;
  ParamManifest manifest;
  Trainables<S> params;

  /// The encoder depends only on `encoder_seed`, so every training seed
  /// shares the same frozen encoder. Trainables are drawn from `seed`.
  static Network init(const ModelDims& dims, std::uint64_t encoder_seed, std::uint64_t seed);

  LstmWeights<S> forward_lstm() const { return {params.fw_w, params.fw_u, params.fw_b}; }
  LstmWeights<S> backward_lstm() const { return {params.bw_w, params.bw_u, params.bw_b}; }

  Vec<S> annotator_embedding(int row) const;

  template <typename T>
  Network<T> cast() const;
};

/// Annotator-aware representations r'_1..r'_n for an embedding e.
template <typename S>
Mat<S> represent(const Network<S>& net, std::span<const int> ids, const Vec<S>& embedding);

/// Same, with an already generated adapter vector.
template <typename S>
Mat<S> represent_with(const Network<S>& net, std::span<const int> ids, const Vec<S>& adapters);

/// CRF emissions from word representations.
template <typename S>
Mat<S> emissions(const Network<S>& net, const Mat<S>& reps);

/// Viterbi tags (not BIO-repaired) given a generated adapter vector.
template <typename S>
std::vector<int> decode(const Network<S>& net, std::span<const int> ids, const Vec<S>& adapters);

/// One training example in index space.
struct EncodedInstance {
  std::string id;
  std::vector<int> tokens;
  std::vector<int> tags;
  int annotator_row = 0;
};

/// Per-position keep mask for time-step dropout; empty means no dropout.
struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double scale = 1.0;
};

/// Loss of one instance; when `grads` is non-null, adds weight * d(loss)
/// to it.
template <typename S>
S instance_loss(const Network<S>& net, const EncodedInstance& inst, const DropoutMask& mask,
                Trainables<S>* grads, S weight);

}  // namespace crowdner
