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
#include <span>
#include <string>
#include <vector>

#include "crowdner/bio.hpp"

namespace crowdner {

/// Crowd annotators are dense indices 0..M-1; kExpert is reserved.
struct AnnotatorId {
  static constexpr int kExpert = -1;

  int index = 0;

  static constexpr AnnotatorId expert() { return AnnotatorId{kExpert}; }
  constexpr bool is_expert() const { return index == kExpert; }

  auto operator<=>(const AnnotatorId&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;

  bool operator==(const Sentence&) const = default;
};

struct LabelSequence {
  AnnotatorId annotator;
  std::vector<std::string> tags;

  bool operator==(const LabelSequence&) const = default;
};

/// Sentences with per-annotator BIO labels and optional expert labels.
/// `annotations[i]` holds the label sequences of sentence i sorted by
/// annotator index, at most one per annotator.
struct CrowdCorpus {
  Tagset tagset;
  std::vector<std::string> annotators;
  std::vector<Sentence> sentences;
  std::vector<std::vector<LabelSequence>> annotations;
  std::vector<std::optional<LabelSequence>> expert;

  std::size_t size() const { return sentences.size(); }
  std::size_t num_annotators() const { return annotators.size(); }
  std::size_t num_annotations() const;
  bool has_expert_labels() const;  // for every sentence

  const LabelSequence* find(std::size_t sentence, AnnotatorId annotator) const;

  /// Appends a sentence and returns its index.
  std::size_t add_sentence(Sentence sentence);

  /// Throws DataError on the first violated invariant.
  void validate() const;

  bool operator==(const CrowdCorpus&) const = default;
};

/// Column layout of the TSV corpus format: token, one column per annotator
/// (`-` where that annotator did not label the sentence), optional final
/// expert column. When `num_annotators` is unset it is inferred from the
/// first data line.
struct FormatSpec {
  std::optional<std::size_t> num_annotators;
  bool expert_column = true;
};

CrowdCorpus parse_corpus(std::istream& in, const FormatSpec& format, const Tagset& tagset,
                         const std::string& source = "<stream>");
CrowdCorpus parse_corpus(const std::string& path, const FormatSpec& format, const Tagset& tagset);

void write_corpus(const CrowdCorpus& corpus, std::ostream& out);
void write_corpus(const CrowdCorpus& corpus, const std::string& path);

/// Default sentence id for position i (omitted from written files).
std::string default_sentence_id(std::size_t index);
std::string default_annotator_name(std::size_t index);

/// Copy of the listed sentences (in the given order) with their labels.
CrowdCorpus subset(const CrowdCorpus& corpus, std::span<const std::size_t> indices);

/// Disjoint sentence-level partition. Part i > 0 gets round(f_i * N)
/// sentences and part 0 the remainder; each part keeps corpus order.
std::vector<CrowdCorpus> split_corpus(const CrowdCorpus& corpus, std::span<const double> fractions,
                                      std::uint64_t seed);

}  // namespace crowdner
