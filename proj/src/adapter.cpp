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

#include "crowdner/adapter.hpp"

#include <sstream>

namespace crowdner {

const char* to_string(AdapterSlot slot) {
  return slot == AdapterSlot::kAttention ? "attention" : "feedforward";
}

const char* to_string(AdapterTensor tensor) {
  switch (tensor) {
    case AdapterTensor::kW1: return "W1";
    case AdapterTensor::kW2: return "W2";
    case AdapterTensor::kB1: return "b1";
    case AdapterTensor::kB2: return "b2";
  }
  return "?";
}

ParamManifest::ParamManifest(int num_layers, int num_adapted_layers, int d_model, int d_adapter)
    : d_model_(d_model), d_adapter_(d_adapter) {
  if (num_layers < 1 || d_model < 1 || d_adapter < 1) throw UsageError("invalid adapter dimensions");
  if (num_adapted_layers < 0 || num_adapted_layers > num_layers) {
    throw UsageError("num_adapted_layers must lie in [0, num_layers]");
  }
  first_adapted_ = num_layers - num_adapted_layers;
  const auto dm = static_cast<std::size_t>(d_model);
  const auto da = static_cast<std::size_t>(d_adapter);
  for (int layer = first_adapted_; layer < num_layers; ++layer) {
    for (AdapterSlot slot : {AdapterSlot::kAttention, AdapterSlot::kFeedForward}) {
      const std::pair<std::size_t, std::size_t> shapes[4] = {{da, dm}, {dm, da}, {1, da}, {1, dm}};
      for (int t = 0; t < 4; ++t) {
        ManifestEntry e{layer, slot, static_cast<AdapterTensor>(t), size_, shapes[t].first,
                        shapes[t].second};
        size_ += e.size();
        entries_.push_back(e);
      }
    }
  }
}

int ParamManifest::adapter_index(int layer, AdapterSlot slot) const {
  if (layer < first_adapted_) return -1;
  const int index = 2 * (layer - first_adapted_) + static_cast<int>(slot);
  return index < num_adapters() ? index : -1;
}

std::string ParamManifest::to_table() const {
  std::ostringstream out;
  out << "layer\tslot\ttensor\toffset\tshape\n";
  for (const auto& e : entries_) {
    out << e.layer << '\t' << to_string(e.slot) << '\t' << to_string(e.tensor) << '\t' << e.offset
        << '\t' << e.rows << 'x' << e.cols << '\n';
  }
  return out.str();
}

template <typename S>
AdapterParams<S> zero_adapters(const ParamManifest& manifest) {
  AdapterParams<S> out(static_cast<std::size_t>(manifest.num_adapters()));
  for (int a = 0; a < manifest.num_adapters(); ++a) {
    auto shape = [&](AdapterTensor t) {
      const auto& e = manifest.entry(a, t);
      return Mat<S>::Zero(static_cast<long>(e.rows), static_cast<long>(e.cols));
    };
    auto& ad = out[static_cast<std::size_t>(a)];
    ad.w1 = shape(AdapterTensor::kW1);
    ad.w2 = shape(AdapterTensor::kW2);
    ad.b1 = shape(AdapterTensor::kB1);
    ad.b2 = shape(AdapterTensor::kB2);
  }
  return out;
}

template <typename S>
Vec<S> pack_params(const AdapterParams<S>& adapters, const ParamManifest& manifest) {
  if (adapters.size() != static_cast<std::size_t>(manifest.num_adapters())) {
    throw UsageError("adapter count does not match the manifest");
  }
  Vec<S> packed(static_cast<long>(manifest.size()));
  for (int a = 0; a < manifest.num_adapters(); ++a) {
    const auto& ad = adapters[static_cast<std::size_t>(a)];
    const Mat<S>* parts[4] = {&ad.w1, &ad.w2, &ad.b1, &ad.b2};
    for (int t = 0; t < 4; ++t) {
      const auto& e = manifest.entry(a, static_cast<AdapterTensor>(t));
      const Mat<S>& m = *parts[t];
      if (static_cast<std::size_t>(m.rows()) != e.rows ||
          static_cast<std::size_t>(m.cols()) != e.cols) {
        throw UsageError("adapter tensor shape does not match the manifest");
      }
      std::copy(m.data(), m.data() + m.size(), packed.data() + e.offset);
    }
  }
  return packed;
}

template <typename S>
AdapterParams<S> unpack_params(std::span<const S> packed, const ParamManifest& manifest) {
  if (packed.size() != manifest.size()) {
    throw UsageError("packed adapter vector has length " + std::to_string(packed.size()) +
                     ", manifest expects " + std::to_string(manifest.size()));
  }
  AdapterParams<S> out = zero_adapters<S>(manifest);
  for (int a = 0; a < manifest.num_adapters(); ++a) {
    auto& ad = out[static_cast<std::size_t>(a)];
    Mat<S>* parts[4] = {&ad.w1, &ad.w2, &ad.b1, &ad.b2};
    for (int t = 0; t < 4; ++t) {
      const auto& e = manifest.entry(a, static_cast<AdapterTensor>(t));
      std::copy(packed.data() + e.offset, packed.data() + e.offset + e.size(), parts[t]->data());
    }
  }
  return out;
}

namespace {
template <typename M, typename P>
M slice(P packed, const ParamManifest& manifest, int adapter, AdapterTensor t) {
  const auto& e = manifest.entry(adapter, t);
  return M(packed + e.offset, static_cast<long>(e.rows), static_cast<long>(e.cols));
}
}  // namespace

template <typename S>
AdapterRef<S>::AdapterRef(const S* packed, const ParamManifest& manifest, int adapter)
    : w1(slice<ConstMatMap<S>>(packed, manifest, adapter, AdapterTensor::kW1)),
      w2(slice<ConstMatMap<S>>(packed, manifest, adapter, AdapterTensor::kW2)),
      b1(slice<ConstMatMap<S>>(packed, manifest, adapter, AdapterTensor::kB1)),
      b2(slice<ConstMatMap<S>>(packed, manifest, adapter, AdapterTensor::kB2)) {}

template <typename S>
AdapterRef<S>::AdapterRef(const Adapter<S>& owned)
    : w1(owned.w1.data(), owned.w1.rows(), owned.w1.cols()),
      w2(owned.w2.data(), owned.w2.rows(), owned.w2.cols()),
      b1(owned.b1.data(), owned.b1.rows(), owned.b1.cols()),
      b2(owned.b2.data(), owned.b2.rows(), owned.b2.cols()) {}

template <typename S>
AdapterGradRef<S>::AdapterGradRef(S* packed, const ParamManifest& manifest, int adapter)
    : w1(slice<MatMap<S>>(packed, manifest, adapter, AdapterTensor::kW1)),
      w2(slice<MatMap<S>>(packed, manifest, adapter, AdapterTensor::kW2)),
      b1(slice<MatMap<S>>(packed, manifest, adapter, AdapterTensor::kB1)),
      b2(slice<MatMap<S>>(packed, manifest, adapter, AdapterTensor::kB2)) {}

template <typename S>
Vec<S> adapter_forward(const Vec<S>& h_in, const Adapter<S>& adapter) {
  if (adapter.w1.cols() != h_in.size() || adapter.w2.rows() != h_in.size() ||
      adapter.w2.cols() != adapter.w1.rows() || adapter.b1.size() != adapter.w1.rows() ||
      adapter.b2.size() != h_in.size()) {
    throw UsageError("adapter shape mismatch");
  }
  Mat<S> x = h_in.transpose();
  Mat<S> out = adapter_forward<S>(x, AdapterRef<S>(adapter), nullptr);
  return out.row(0).transpose();
}

template <typename S>
Mat<S> adapter_forward(const Mat<S>& x, const AdapterRef<S>& adapter, Mat<S>* pre) {
  Mat<S> z = x * adapter.w1.transpose();
  z.rowwise() += adapter.b1.row(0);
  Mat<S> out = z.unaryExpr([](S v) { return gelu(v); }) * adapter.w2.transpose();
  out.rowwise() += adapter.b2.row(0);
  out += x;
  if (pre) *pre = std::move(z);
  return out;
}

template <typename S>
Mat<S> adapter_backward(const Mat<S>& x, const Mat<S>& pre, const AdapterRef<S>& adapter,
                        const Mat<S>& d_out, AdapterGradRef<S>& grad) {
  const Mat<S> mid = pre.unaryExpr([](S v) { return gelu(v); });
  grad.w2.noalias() += d_out.transpose() * mid;
  grad.b2.row(0) += d_out.colwise().sum();
  Mat<S> d_pre = (d_out * adapter.w2).cwiseProduct(pre.unaryExpr([](S v) { return gelu_grad(v); }));
  grad.w1.noalias() += d_pre.transpose() * x;
  grad.b1.row(0) += d_pre.colwise().sum();
  Mat<S> d_x = d_out;
  d_x.noalias() += d_pre * adapter.w1;
  return d_x;
}

template <typename S>
Vec<S> pgn_generate(const Vec<S>& embedding, const Mat<S>& theta) {
  if (embedding.size() != theta.cols()) {
    throw UsageError("annotator embedding has dimension " + std::to_string(embedding.size()) +
                     ", PGN expects " + std::to_string(theta.cols()));
  }
  return theta * embedding;
}

#define CROWDNER_INSTANTIATE(S)                                                               \
  template AdapterParams<S> zero_adapters<S>(const ParamManifest&);                           \
  template Vec<S> pack_params<S>(const AdapterParams<S>&, const ParamManifest&);              \
  template AdapterParams<S> unpack_params<S>(std::span<const S>, const ParamManifest&);       \
  template struct AdapterRef<S>;                                                              \
  template struct AdapterGradRef<S>;                                                          \
  template Vec<S> adapter_forward<S>(const Vec<S>&, const Adapter<S>&);                       \
  template Mat<S> adapter_forward<S>(const Mat<S>&, const AdapterRef<S>&, Mat<S>*);           \
  template Mat<S> adapter_backward<S>(const Mat<S>&, const Mat<S>&, const AdapterRef<S>&,     \
                                      const Mat<S>&, AdapterGradRef<S>&);                     \
  template Vec<S> pgn_generate<S>(const Vec<S>&, const Mat<S>&);

CROWDNER_INSTANTIATE(float)
CROWDNER_INSTANTIATE(double)
#undef CROWDNER_INSTANTIATE

}  // namespace crowdner
