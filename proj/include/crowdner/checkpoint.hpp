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

/// Writes `dir/metadata.json`, `dir/manifest.tsv`, `dir/index.tsv` and one
/// little-endian float32 file per tensor under `dir/tensors/`. The index
/// lists name, rows, cols, byte offset and the file's crc32.
void save_checkpoint(const TrainedModel& model, const std::string& dir);

/// Restores a model saved by save_checkpoint. Throws DataError on a missing
/// file, a shape mismatch or a checksum mismatch.
TrainedModel load_checkpoint(const std::string& dir);

}  // namespace crowdner
