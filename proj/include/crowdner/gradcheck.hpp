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
#include <string>
#include <vector>

#include "crowdner/network.hpp"

namespace crowdner {

struct GradCheckGroup {
  std::string name;
  std::size_t entries = 0;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the group.
  double rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error() const;
  std::string to_text() const;
};

/// The smallest network the finite-difference suite runs on:
/// d_model 8, two heads, two layers, d_adapter 2, d_ann 2, d_h 4, three tags
/// and three annotator rows.
ModelDims tiny_model_dims();

/// Central finite differences (float64) of the mean loss over a small
/// random batch of length-3 sentences, compared with the analytic gradient
/// of every trainable tensor.
GradCheckReport gradient_check(std::uint64_t seed = 1, double step = 1e-5);

}  // namespace crowdner
