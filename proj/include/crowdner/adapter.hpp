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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crowdner/common.hpp"

namespace crowdner {

/// tanh approximation of GELU.
template <typename S>
inline S gelu(S x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  const S inner = static_cast<S>(kC) * (x + static_cast<S>(0.044715) * x * x * x);
  return static_cast<S>(0.5) * x * (static_cast<S>(1) + std::tanh(inner));
}

template <typename S>
inline S gelu_grad(S x) {
  constexpr double kC = 0.7978845608028654;
  const S x2 = x * x;
  const S t = std::tanh(static_cast<S>(kC) * (x + static_cast<S>(0.044715) * x2 * x));
  return static_cast<S>(0.5) * (static_cast<S>(1) + t) +
         static_cast<S>(0.5) * x * (static_cast<S>(1) - t * t) * static_cast<S>(kC) *
             (static_cast<S>(1) + static_cast<S>(3 * 0.044715) * x2);
}

enum class AdapterSlot { kAttention = 0, kFeedForward = 1 };
enum class AdapterTensor { kW1 = 0, kW2 = 1, kB1 = 2, kB2 = 3 };

const char* to_string(AdapterSlot slot);
const char* to_string(AdapterTensor tensor);

struct ManifestEntry {
  int layer = 0;
  AdapterSlot slot = AdapterSlot::kAttention;
  AdapterTensor tensor = AdapterTensor::kW1;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const ManifestEntry&) const = default;
};

/// Layout of the packed adapter vector V. Adapters are ordered by layer
/// (ascending), attention adapter before feed-forward adapter; each adapter
/// contributes W1 (d_adapter x d_model), W2 (d_model x d_adapter), b1, b2,
/// flattened row-major. Only the top `num_adapted_layers` layers carry
/// adapters.
class ParamManifest {
 public:
  ParamManifest() = default;
  ParamManifest(int num_layers, int num_adapted_layers, int d_model, int d_adapter);

  std::size_t size() const { return size_; }
  int num_adapters() const { return static_cast<int>(entries_.size() / 4); }
  int first_adapted_layer() const { return first_adapted_; }
  int d_model() const { return d_model_; }
  int d_adapter() const { return d_adapter_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }

  /// -1 when the layer carries no adapters.
  int adapter_index(int layer, AdapterSlot slot) const;
  const ManifestEntry& entry(int adapter, AdapterTensor tensor) const {
    return entries_.at(static_cast<std::size_t>(adapter) * 4 + static_cast<std::size_t>(tensor));
  }

  /// Plain-text table: layer, slot, tensor, offset, shape.
  std::string to_table() const;

  bool operator==(const ParamManifest&) const = default;

 private:
  std::vector<ManifestEntry> entries_;
  std::size_t size_ = 0;
  int first_adapted_ = 0;
  int d_model_ = 0;
  int d_adapter_ = 0;
};

/// Owned parameters of one adapter.
template <typename S>
struct Adapter {
  Mat<S> w1;  // d_adapter x d_model
  Mat<S> w2;  // d_model x d_adapter
  Mat<S> b1;  // 1 x d_adapter
  Mat<S> b2;  // 1 x d_model

  bool operator==(const Adapter&) const = default;
};

/// All adapters in manifest order.
template <typename S>
using AdapterParams = std::vector<Adapter<S>>;

template <typename S>
AdapterParams<S> zero_adapters(const ParamManifest& manifest);

template <typename S>
Vec<S> pack_params(const AdapterParams<S>& adapters, const ParamManifest& manifest);

/// Throws UsageError when the vector length disagrees with the manifest.
template <typename S>
AdapterParams<S> unpack_params(std::span<const S> packed, const ParamManifest& manifest);

/// Non-owning view of one adapter inside a packed vector.
template <typename S>
struct AdapterRef {
  AdapterRef(const S* packed, const ParamManifest& manifest, int adapter);
  explicit AdapterRef(const Adapter<S>& owned);

  ConstMatMap<S> w1, w2, b1, b2;
};

template <typename S>
struct AdapterGradRef {
  AdapterGradRef(S* packed, const ParamManifest& manifest, int adapter);

  MatMap<S> w1, w2, b1, b2;
};

/// h_out = W2 GELU(W1 h_in + b1) + b2 + h_in for a single vector.
template <typename S>
Vec<S> adapter_forward(const Vec<S>& h_in, const Adapter<S>& adapter);

/// Row-wise adapter over a sequence (n x d_model). `pre`, when given,
/// receives the pre-activation (n x d_adapter) needed by the backward pass.
template <typename S>
Mat<S> adapter_forward(const Mat<S>& x, const AdapterRef<S>& adapter, Mat<S>* pre);

/// Accumulates parameter gradients into `grad` and returns d(loss)/d(x).
template <typename S>
Mat<S> adapter_backward(const Mat<S>& x, const Mat<S>& pre, const AdapterRef<S>& adapter,
                        const Mat<S>& d_out, AdapterGradRef<S>& grad);

/// V = theta * e.
template <typename S>
Vec<S> pgn_generate(const Vec<S>& embedding, const Mat<S>& theta);

}  // namespace crowdner
