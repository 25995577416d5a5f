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
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowdner/training.hpp"

namespace crowdner {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Flat `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; anything else without `=` is a UsageError naming the line.
KeyValues parse_key_values(std::istream& in, const std::string& source = "<config>");
KeyValues load_key_values(const std::string& path);

/// Effective configuration of one CLI invocation: every TrainConfig key plus
/// paths and command parameters. Unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  std::string corpus;
  std::string tagset;  // defaults to <corpus>.tags
  std::string out;
  std::string mode = "annotator-unsup";
  std::optional<double> expert_fraction;
  std::string dev_corpus;
  std::string checkpoint;
  std::string inference_expert;  // empty: the mode's default
  std::string profiles;
  std::string gold;
  std::size_t grammar_sentences = 0;
  std::optional<std::size_t> filter_k;
  std::optional<std::size_t> num_annotators;
  bool expert_column = true;
  long max_steps = 0;

  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& values);
  /// Sorted `key=value` pairs; unset optional values are omitted.
  KeyValues entries() const;
  /// crc32 of the canonical entries text.
  std::string hash() const;
};

/// Entry point of the `crowdner` tool. Returns 0 on success, 1 on usage
/// errors, 2 on data errors and 3 on numerical failures.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace crowdner
