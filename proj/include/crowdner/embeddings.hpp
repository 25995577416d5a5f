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

#include <string>

#include "crowdner/training.hpp"

namespace crowdner {

/// CSV with one row per crowd annotator plus the expert rows: the centroid
/// for every annotator-aware model and the learned expert slot for a
/// supervised one. Columns: label, kind (crowd, centroid or learned), the
/// raw embedding e0..e{d-1}, then pc1, pc2 from a PCA fitted on the crowd
/// rows. Requires an annotator-aware model with at least two annotators.
std::string export_embeddings(const TrainedModel& model);

void export_embeddings(const TrainedModel& model, const std::string& out_path);

}  // namespace crowdner
