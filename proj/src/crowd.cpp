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

#include "crowdner/crowd.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "crowdner/eval.hpp"

namespace crowdner {

void TrainingMode::validate() const {
  if (expert_fraction && !(*expert_fraction > 0.0 && *expert_fraction <= 1.0)) {
    throw UsageError("expert fraction must lie in (0,1]");
  }
  if (kind == ModeKind::kAnnotatorSup && !expert_fraction) {
    throw UsageError("annotator-sup needs an expert fraction");
  }
  if (kind == ModeKind::kAnnotatorUnsup && expert_fraction) {
    throw UsageError("annotator-unsup does not use expert labels; use annotator-sup");
  }
}

ModeKind parse_mode(const std::string& name) {
  if (name == "all") return ModeKind::kAll;
  if (name == "mv") return ModeKind::kMajorityVote;
  if (name == "gold") return ModeKind::kGold;
  if (name == "annotator-unsup") return ModeKind::kAnnotatorUnsup;
  if (name == "annotator-sup") return ModeKind::kAnnotatorSup;
  throw UsageError("unknown mode '" + name + "'");
}

std::string to_string(ModeKind kind) {
  switch (kind) {
    case ModeKind::kAll: return "all";
    case ModeKind::kMajorityVote: return "mv";
    case ModeKind::kGold: return "gold";
    case ModeKind::kAnnotatorUnsup: return "annotator-unsup";
    case ModeKind::kAnnotatorSup: return "annotator-sup";
  }
  return "?";
}

AnnotatorRegistry AnnotatorRegistry::for_mode(const CrowdCorpus& corpus, const TrainingMode& mode) {
  AnnotatorRegistry reg;
  reg.mode = mode.kind;
  if (!mode.annotator_aware()) {
    reg.names = {"shared"};
    return reg;
  }
  if (corpus.num_annotators() == 0) throw DataError("annotator-aware training needs crowd annotators");
  reg.names = corpus.annotators;
  if (mode.kind == ModeKind::kAnnotatorSup) {
    reg.expert_row = reg.rows();
    reg.names.push_back("expert");
  }
  return reg;
}

int AnnotatorRegistry::row_of(AnnotatorId id) const {
  if (mode != ModeKind::kAnnotatorUnsup && mode != ModeKind::kAnnotatorSup) return 0;
  if (id.is_expert()) {
    if (expert_row < 0) throw UsageError("this model has no expert embedding");
    return expert_row;
  }
  if (id.index < 0 || id.index >= crowd_rows()) {
    throw UsageError("annotator " + std::to_string(id.index) + " is not in the model");
  }
  return id.index;
}

namespace {

std::vector<std::size_t> expert_sentences(const CrowdCorpus& corpus, const TrainingMode& mode) {
  if (!mode.expert_fraction) return {};
  auto picked = select_informative(corpus, *mode.expert_fraction).sentences;
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

std::vector<TrainInstance> build_instances(const CrowdCorpus& corpus, const TrainingMode& mode) {
  mode.validate();
  std::vector<TrainInstance> out;
  const AnnotatorId shared{0};
  switch (mode.kind) {
    case ModeKind::kAll:
    case ModeKind::kAnnotatorUnsup:
    case ModeKind::kAnnotatorSup: {
      const bool aware = mode.annotator_aware();
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (const auto& seq : corpus.annotations[i]) {
          out.push_back({i, aware ? seq.annotator : shared, seq.tags});
        }
      }
      const AnnotatorId expert_id = aware ? AnnotatorId::expert() : shared;
      for (std::size_t i : expert_sentences(corpus, mode)) {
        out.push_back({i, expert_id, corpus.expert[i]->tags});
      }
      break;
    }
    case ModeKind::kMajorityVote: {
      const auto picked = expert_sentences(corpus, mode);
      std::size_t single = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (std::binary_search(picked.begin(), picked.end(), i)) {
          out.push_back({i, shared, corpus.expert[i]->tags});
        } else if (!corpus.annotations[i].empty()) {
          single += corpus.annotations[i].size() == 1 ? 1 : 0;
          out.push_back({i, shared, majority_vote(corpus.annotations[i], corpus.tagset)});
        }
      }
      if (single > 0) spdlog::info("majority vote: {} sentences carry a single annotation", single);
      break;
    }
    case ModeKind::kGold: {
      std::vector<std::size_t> picked;
      if (mode.expert_fraction) {
        picked = expert_sentences(corpus, mode);
      } else {
        if (!corpus.has_expert_labels()) throw DataError("gold mode needs expert labels on every sentence");
        picked.resize(corpus.size());
        std::iota(picked.begin(), picked.end(), 0);
      }
      for (std::size_t i : picked) out.push_back({i, shared, corpus.expert[i]->tags});
      break;
    }
  }
  return out;
}

std::vector<std::string> majority_vote(std::span<const LabelSequence> sequences,
                                       const Tagset& tagset) {
  if (sequences.empty()) throw UsageError("majority vote needs at least one label sequence");
  const std::size_t n = sequences.front().tags.size();
  for (const auto& s : sequences) {
    if (s.tags.size() != n) throw DataError("majority vote over sequences of different lengths");
  }
  std::vector<std::string> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::map<std::string, std::size_t> votes;
    for (const auto& s : sequences) ++votes[s.tags[t]];
    std::size_t best = 0;
    for (const auto& [tag, count] : votes) best = std::max(best, count);
    auto o = votes.find("O");
    if (o != votes.end() && o->second == best) {
      out[t] = "O";
    } else {
      // std::map iterates in lexicographic order
      for (const auto& [tag, count] : votes) {
        if (count == best) {
          out[t] = tag;
          break;
        }
      }
    }
  }
  return repair_bio(out, tagset);
}

template <typename S>
Vec<S> expert_centroid(const Mat<S>& table, int crowd_rows) {
  if (crowd_rows < 1 || crowd_rows > table.rows()) {
    throw UsageError("expert centroid needs at least one crowd annotator embedding");
  }
  return table.topRows(crowd_rows).colwise().mean().transpose();
}

template Vec<float> expert_centroid<float>(const Mat<float>&, int);
template Vec<double> expert_centroid<double>(const Mat<double>&, int);

std::vector<AnnotatorQuality> annotator_quality(const CrowdCorpus& corpus) {
  std::vector<std::vector<std::vector<std::string>>> pred(corpus.num_annotators());
  std::vector<std::vector<std::vector<std::string>>> gold(corpus.num_annotators());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus.expert[i]) continue;
    for (const auto& seq : corpus.annotations[i]) {
      const auto a = static_cast<std::size_t>(seq.annotator.index);
      pred[a].push_back(seq.tags);
      gold[a].push_back(corpus.expert[i]->tags);
    }
  }
  std::vector<AnnotatorQuality> out;
  for (std::size_t a = 0; a < corpus.num_annotators(); ++a) {
    if (pred[a].empty()) {
      spdlog::warn("annotator {} has no expert-labeled annotations; skipped", corpus.annotators[a]);
      continue;
    }
    out.push_back({static_cast<int>(a), corpus.annotators[a], pred[a].size(),
                   evaluate(pred[a], gold[a]).f1()});
  }
  return out;
}

std::string FilterResult::audit() const {
  std::string out = fmt::format("removed {} annotators, dropped {} sentences\n", removed.size(),
                                dropped_sentences);
  for (const auto& q : removed) {
    out += fmt::format("removed\t{}\tf1={:.2f}\tsentences={}\n", q.name, q.f1, q.sentences);
  }
  for (std::size_t a = 0; a < old_to_new.size(); ++a) {
    if (old_to_new[a] >= 0) out += fmt::format("kept\t{}\t->\t{}\n", a, old_to_new[a]);
  }
  return out;
}

FilterResult filter_annotators(const CrowdCorpus& corpus, std::size_t k) {
  const std::size_t m = corpus.num_annotators();
  if (k >= m) {
    throw UsageError("cannot filter " + std::to_string(k) + " of " + std::to_string(m) + " annotators");
  }
  const auto quality = annotator_quality(corpus);
  std::vector<AnnotatorQuality> ranked;
  for (std::size_t a = 0; a < m; ++a) {
    auto it = std::find_if(quality.begin(), quality.end(),
                           [&](const auto& q) { return q.annotator == static_cast<int>(a); });
    ranked.push_back(it != quality.end() ? *it
                                         : AnnotatorQuality{static_cast<int>(a), corpus.annotators[a], 0, -1.0});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& x, const auto& y) { return x.f1 < y.f1; });

  FilterResult result;
  result.old_to_new.assign(m, 0);
  for (std::size_t r = 0; r < k; ++r) {
    result.old_to_new[static_cast<std::size_t>(ranked[r].annotator)] = -1;
    result.removed.push_back(ranked[r]);
  }
  int next = 0;
  for (auto& id : result.old_to_new) {
    if (id >= 0) id = next++;
  }

  CrowdCorpus& out = result.corpus;
  out.tagset = corpus.tagset;
  for (std::size_t a = 0; a < m; ++a) {
    if (result.old_to_new[a] >= 0) out.annotators.push_back(corpus.annotators[a]);
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::vector<LabelSequence> kept;
    for (const auto& seq : corpus.annotations[i]) {
      const int mapped = result.old_to_new[static_cast<std::size_t>(seq.annotator.index)];
      if (mapped >= 0) kept.push_back({AnnotatorId{mapped}, seq.tags});
    }
    if (kept.empty() && !corpus.annotations[i].empty()) {
      ++result.dropped_sentences;
      continue;
    }
    const std::size_t idx = out.add_sentence(corpus.sentences[i]);
    out.annotations[idx] = std::move(kept);
    out.expert[idx] = corpus.expert[i];
  }
  return result;
}

std::string Selection::audit(const CrowdCorpus& corpus) const {
  std::string out = fmt::format("selected {} sentences\nrank\tid\tentities\ttokens\n", sentences.size());
  for (std::size_t r = 0; r < sentences.size(); ++r) {
    const auto& s = corpus.sentences[sentences[r]];
    out += fmt::format("{}\t{}\t{}\t{}\n", r + 1, s.id, entity_counts[r], s.tokens.size());
  }
  return out;
}

Selection select_informative(const CrowdCorpus& corpus, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("selection fraction must lie in (0,1]");
  std::vector<std::size_t> candidates;
  std::vector<std::size_t> counts(corpus.size(), 0);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus.expert[i]) continue;
    candidates.push_back(i);
    counts[i] = extract_spans(corpus.expert[i]->tags).size();
  }
  if (candidates.empty()) throw DataError("selection needs expert labels");
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return corpus.sentences[a].tokens.size() > corpus.sentences[b].tokens.size();
  });
  const auto keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(candidates.size()))), 1,
      candidates.size());
  Selection sel;
  sel.sentences.assign(candidates.begin(), candidates.begin() + static_cast<long>(keep));
  for (std::size_t i : sel.sentences) sel.entity_counts.push_back(counts[i]);
  return sel;
}

}  // namespace crowdner
