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

#include "crowdner/gradcheck.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "crowdner/training.hpp"

namespace crowdner {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, g.rel_error);
  return m;
}

std::string GradCheckReport::to_text() const {
  std::string out = fmt::format("{:<22}{:>8}{:>14}{:>14}\n", "tensor", "entries", "rel_err", "max_abs_err");
  for (const auto& g : groups) {
    out += fmt::format("{:<22}{:>8}{:>14.3e}{:>14.3e}\n", g.name, g.entries, g.rel_error,
                       g.max_abs_error);
  }
  out += fmt::format("max relative error {:.3e}\n", max_rel_error());
  return out;
}

ModelDims tiny_model_dims() {
  ModelDims dims;
  dims.encoder.vocab_size = 12;
  dims.encoder.d_model = 8;
  dims.encoder.n_layers = 2;
  dims.encoder.n_heads = 2;
  dims.encoder.d_ff = 16;
  dims.encoder.max_len = 8;
  dims.d_adapter = 2;
  dims.d_ann = 2;
  dims.d_h = 4;
  dims.num_adapted_layers = 2;
  dims.num_tags = 3;
  dims.annotator_rows = 3;
  return dims;
}

GradCheckReport gradient_check(std::uint64_t seed, double step) {
  const ModelDims dims = tiny_model_dims();
  Network<double> net = Network<double>::init(dims, seed + 1000, seed);
  std::mt19937_64 rng(seed);
  // Non-zero CRF biases and transitions so their gradients are generic.
  std::normal_distribution<double> normal(0.0, 0.5);
  for (auto* m : {&net.params.crf_b, &net.params.crf_t}) {
    for (long i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
  }

  // Tags 0 = O, 1 = B-X, 2 = I-X; every sequence here is valid BIO.
  const std::vector<std::vector<int>> tag_choices = {{0, 1, 2}, {1, 2, 0}, {1, 0, 1}, {0, 0, 1}};
  std::uniform_int_distribution<int> token(2, dims.encoder.vocab_size - 1);
  std::vector<EncodedInstance> batch;
  for (int a = 0; a < dims.annotator_rows; ++a) {
    EncodedInstance inst;
    inst.id = "check" + std::to_string(a);
    for (int t = 0; t < 3; ++t) inst.tokens.push_back(token(rng));
    inst.tags = tag_choices[static_cast<std::size_t>(a) % tag_choices.size()];
    inst.annotator_row = a;
    batch.push_back(inst);
  }

  Trainables<double> grads = net.params.zeros_like();
  compute_gradients<double>(net, batch, {}, grads);
  auto loss_at = [&]() {
    double total = 0.0;
    for (const auto& inst : batch) total += instance_loss<double>(net, inst, {}, nullptr, 1.0);
    return total / static_cast<double>(batch.size());
  };

  GradCheckReport report;
  const auto& names = Trainables<double>::names();
  auto params = net.params.tensors();
  auto analytic = grads.tensors();
  for (std::size_t g = 0; g < params.size(); ++g) {
    Mat<double>& p = *params[g];
    Mat<double> numeric(p.rows(), p.cols());
    for (long i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + step;
      const double up = loss_at();
      p.data()[i] = saved - step;
      const double down = loss_at();
      p.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const Mat<double>& a = *analytic[g];
    const double denom = std::max({a.norm(), numeric.norm(), 1e-12});
    report.groups.push_back({names[g], static_cast<std::size_t>(p.size()),
                             (a - numeric).norm() / denom, (a - numeric).cwiseAbs().maxCoeff()});
  }
  return report;
}

}  // namespace crowdner
