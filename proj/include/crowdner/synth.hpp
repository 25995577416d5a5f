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
#include <vector>

#include "crowdner/corpus.hpp"

namespace crowdner {

/// Noise model of one simulated crowd annotator. Applied to the expert spans
/// of a sentence in the order: miss, confuse, jitter, spurious.
struct AnnotatorProfile {
  std::string name;
  double miss_rate = 0.0;
  /// Row-stochastic over entity types: confusion[s][t] = P(type s labeled t).
  std::vector<std::vector<double>> confusion;
  /// Expected spurious entities per sentence (Poisson mean).
  double spurious_rate = 0.0;
  double boundary_jitter = 0.0;

  /// Throws DataError when probabilities or the confusion shape are invalid.
  void validate(std::size_t num_types) const;

  static AnnotatorProfile clean(std::string name, std::size_t num_types);
  /// Uniform confusion, half the entities dropped.
  static AnnotatorProfile spammer(std::string name, std::size_t num_types);
};

/// Labels a random `coverage[a]` fraction of the sentences for each profile
/// by perturbing the expert labels. Expert labels are carried over.
CrowdCorpus synth_generate(const CrowdCorpus& gold, std::span<const AnnotatorProfile> profiles,
                           std::span<const double> coverage, std::uint64_t seed);

/// Expert-only corpus from a seeded template grammar with PER, LOC and ORG
/// entities. Entity names are drawn from a large generated pool, so held-out
/// sentences mostly contain unseen names.
CrowdCorpus generate_gold_corpus(std::size_t num_sentences, std::uint64_t seed);

/// JSON list of profile objects: name, miss_rate, confusion, spurious_rate,
/// boundary_jitter and an optional coverage (default 1.0).
struct ProfileSet {
  std::vector<AnnotatorProfile> profiles;
  std::vector<double> coverage;
};
ProfileSet load_profiles(const std::string& path);
void save_profiles(const ProfileSet& set, const std::string& path);

}  // namespace crowdner
