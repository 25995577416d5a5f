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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdner/common.hpp"
#include "crowdner/corpus.hpp"

namespace crowdner {

enum class ModeKind { kAll, kMajorityVote, kGold, kAnnotatorUnsup, kAnnotatorSup };

/// Which instances a model is trained on. `expert_fraction` selects the
/// most informative expert-labeled sentences: required for kAnnotatorSup,
/// optional for kAll / kMajorityVote (supervised baselines), and defaults to
/// all expert sentences for kGold.
struct TrainingMode {
  ModeKind kind = ModeKind::kAnnotatorUnsup;
  std::optional<double> expert_fraction;

  void validate() const;
  bool annotator_aware() const {
    return kind == ModeKind::kAnnotatorUnsup || kind == ModeKind::kAnnotatorSup;
  }
};

/// all, mv, gold, annotator-unsup, annotator-sup.
ModeKind parse_mode(const std::string& name);
std::string to_string(ModeKind kind);

/// Maps annotator ids onto rows of the model's embedding table.
struct AnnotatorRegistry {
  ModeKind mode = ModeKind::kAnnotatorUnsup;
  std::vector<std::string> names;  // one per row
  int expert_row = -1;             // learned expert slot, supervised only

  static AnnotatorRegistry for_mode(const CrowdCorpus& corpus, const TrainingMode& mode);

  int rows() const { return static_cast<int>(names.size()); }
  /// Number of crowd rows averaged by the expert centroid.
  int crowd_rows() const { return expert_row >= 0 ? expert_row : rows(); }
  int row_of(AnnotatorId id) const;

  bool operator==(const AnnotatorRegistry&) const = default;
};

struct TrainInstance {
  std::size_t sentence = 0;
  AnnotatorId annotator;
  std::vector<std::string> tags;

  bool operator==(const TrainInstance&) const = default;
};

/// Builds training instances for a mode. ALL, MV and GOLD use the single
/// shared annotator id 0. Throws DataError when the mode needs expert labels
/// that are missing.
std::vector<TrainInstance> build_instances(const CrowdCorpus& corpus, const TrainingMode& mode);

/// Per-token vote over the sentences' label sequences. Ties prefer O, then
/// the lexicographically smallest tag; the result is BIO-repaired.
std::vector<std::string> majority_vote(std::span<const LabelSequence> sequences,
                                       const Tagset& tagset);

/// Mean of the first `crowd_rows` rows of the embedding table.
template <typename S>
Vec<S> expert_centroid(const Mat<S>& table, int crowd_rows);

struct AnnotatorQuality {
  int annotator = 0;
  std::string name;
  std::size_t sentences = 0;
  double f1 = 0.0;
};

/// Entity-level F1 of each annotator against the expert labels, over the
/// sentences they labeled. Annotators without any scored sentence are
/// skipped with a warning.
std::vector<AnnotatorQuality> annotator_quality(const CrowdCorpus& corpus);

struct FilterResult {
  CrowdCorpus corpus;
  std::vector<int> old_to_new;  // -1 for removed annotators
  std::vector<AnnotatorQuality> removed;
  std::size_t dropped_sentences = 0;

  std::string audit() const;
};

/// Removes the k lowest-F1 annotators; sentences left without annotations
/// are dropped and the surviving ids are renumbered densely.
FilterResult filter_annotators(const CrowdCorpus& corpus, std::size_t k);

struct Selection {
  std::vector<std::size_t> sentences;  // in rank order
  std::vector<std::size_t> entity_counts;

  std::string audit(const CrowdCorpus& corpus) const;
};

/// Ranks expert-labeled sentences by expert entity count (descending), then
/// length (descending), then corpus order, and keeps the top fraction
/// (at least one sentence).
Selection select_informative(const CrowdCorpus& corpus, double fraction);

}  // namespace crowdner
