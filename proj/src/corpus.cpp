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

#include "crowdner/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "crowdner/common.hpp"

namespace crowdner {

namespace {

constexpr std::string_view kIdDirective = "# id = ";
constexpr std::string_view kAnnotatorsDirective = "# annotators = ";
constexpr std::string_view kMissing = "-";

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> cols;
  std::istringstream ss(line);
  std::string col;
  while (ss >> col) cols.push_back(col);
  return cols;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

struct PendingRow {
  std::vector<std::string> cols;
  std::size_t line_no = 0;
};

class CorpusReader {
 public:
  CorpusReader(const FormatSpec& format, const Tagset& tagset, std::string source)
      : format_(format), source_(std::move(source)) {
    corpus_.tagset = tagset;
  }

  CrowdCorpus read(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (is_blank(line)) {
        flush();
        continue;
      }
      if (line.starts_with(kAnnotatorsDirective)) {
        if (!corpus_.sentences.empty() || !rows_.empty()) {
          fail(line_no, "annotator header must precede all sentences");
        }
        names_ = split_ws(line.substr(kAnnotatorsDirective.size()));
        continue;
      }
      if (line.starts_with(kIdDirective)) {
        if (!rows_.empty()) fail(line_no, "sentence id directive inside a sentence");
        pending_id_ = line.substr(kIdDirective.size());
        while (!pending_id_.empty() && std::isspace(static_cast<unsigned char>(pending_id_.back()))) {
          pending_id_.pop_back();
        }
        continue;
      }
      auto cols = split_ws(line);
      if (!num_annotators_) {
        const std::size_t fixed = 1 + (format_.expert_column ? 1 : 0);
        if (format_.num_annotators) {
          num_annotators_ = *format_.num_annotators;
        } else if (cols.size() < fixed) {
          fail(line_no, "expected at least " + std::to_string(fixed) + " columns, got " +
                            std::to_string(cols.size()));
        } else {
          num_annotators_ = cols.size() - fixed;
        }
        init_annotators(line_no);
      }
      const std::size_t expected = 1 + *num_annotators_ + (format_.expert_column ? 1 : 0);
      if (cols.size() != expected) {
        fail(line_no, "expected " + std::to_string(expected) + " columns, got " +
                          std::to_string(cols.size()));
      }
      rows_.push_back({std::move(cols), line_no});
    }
    flush();
    if (!num_annotators_) {
      num_annotators_ = format_.num_annotators.value_or(0);
      init_annotators(line_no);
    }
    if (repaired_ > 0) {
      spdlog::info("{}: repaired {} orphan I- tags", source_, repaired_);
    }
    corpus_.validate();
    return std::move(corpus_);
  }

 private:
  [[noreturn]] void fail(std::size_t line_no, const std::string& what) const {
    throw DataError(source_ + ":" + std::to_string(line_no) + ": " + what);
  }

  void init_annotators(std::size_t line_no) {
    if (names_.empty()) {
      for (std::size_t a = 0; a < *num_annotators_; ++a) {
        names_.push_back(default_annotator_name(a));
      }
    } else if (names_.size() != *num_annotators_) {
      fail(line_no, "annotator header lists " + std::to_string(names_.size()) +
                        " names for " + std::to_string(*num_annotators_) + " columns");
    }
    corpus_.annotators = names_;
  }

  std::optional<std::vector<std::string>> column(std::size_t col) {
    std::size_t missing = 0;
    for (const auto& row : rows_) missing += row.cols[col] == kMissing ? 1 : 0;
    if (missing == rows_.size()) return std::nullopt;
    if (missing != 0) {
      for (const auto& row : rows_) {
        if (row.cols[col] == kMissing) {
          fail(row.line_no, "column " + std::to_string(col + 1) +
                                " mixes '-' with labels inside one sentence");
        }
      }
    }
    std::vector<std::string> tags;
    tags.reserve(rows_.size());
    for (const auto& row : rows_) {
      const std::string& tag = row.cols[col];
      if (!corpus_.tagset.find(tag)) fail(row.line_no, "undeclared tag '" + tag + "'");
      tags.push_back(tag);
    }
    std::size_t changed = 0;
    auto fixed = repair_bio(tags, corpus_.tagset, &changed);
    repaired_ += changed;
    return fixed;
  }

  void flush() {
    if (rows_.empty()) {
      if (!pending_id_.empty()) {
        throw DataError(source_ + ": sentence id '" + pending_id_ + "' without tokens");
      }
      return;
    }
    Sentence sentence;
    sentence.id = pending_id_.empty() ? default_sentence_id(corpus_.sentences.size()) : pending_id_;
    for (const auto& row : rows_) sentence.tokens.push_back(row.cols[0]);
    const std::size_t index = corpus_.add_sentence(std::move(sentence));
    for (std::size_t a = 0; a < *num_annotators_; ++a) {
      if (auto tags = column(1 + a)) {
        corpus_.annotations[index].push_back({AnnotatorId{static_cast<int>(a)}, std::move(*tags)});
      }
    }
    if (format_.expert_column) {
      if (auto tags = column(1 + *num_annotators_)) {
        corpus_.expert[index] = LabelSequence{AnnotatorId::expert(), std::move(*tags)};
      }
    }
    rows_.clear();
    pending_id_.clear();
  }

  FormatSpec format_;
  std::string source_;
  CrowdCorpus corpus_;
  std::optional<std::size_t> num_annotators_;
  std::vector<std::string> names_;
  std::vector<PendingRow> rows_;
  std::string pending_id_;
  std::size_t repaired_ = 0;
};

}  // namespace

std::string default_sentence_id(std::size_t index) { return "s" + std::to_string(index); }
std::string default_annotator_name(std::size_t index) { return "a" + std::to_string(index); }

std::size_t CrowdCorpus::num_annotations() const {
  std::size_t total = 0;
  for (const auto& a : annotations) total += a.size();
  return total;
}

bool CrowdCorpus::has_expert_labels() const {
  return std::all_of(expert.begin(), expert.end(), [](const auto& e) { return e.has_value(); });
}

const LabelSequence* CrowdCorpus::find(std::size_t sentence, AnnotatorId annotator) const {
  if (annotator.is_expert()) {
    return expert.at(sentence) ? &*expert[sentence] : nullptr;
  }
  for (const auto& seq : annotations.at(sentence)) {
    if (seq.annotator == annotator) return &seq;
  }
  return nullptr;
}

std::size_t CrowdCorpus::add_sentence(Sentence sentence) {
  sentences.push_back(std::move(sentence));
  annotations.emplace_back();
  expert.emplace_back();
  return sentences.size() - 1;
}

void CrowdCorpus::validate() const {
  if (annotations.size() != sentences.size() || expert.size() != sentences.size()) {
    throw DataError("corpus tables are misaligned");
  }
  if (!tagset.find("O")) throw DataError("tagset lacks O");
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    if (s.tokens.empty()) throw DataError("sentence '" + s.id + "' has no tokens");
    for (const auto& tok : s.tokens) {
      if (tok.empty()) throw DataError("sentence '" + s.id + "' has an empty token");
    }
    int prev = -1;
    for (const auto& seq : annotations[i]) {
      const int a = seq.annotator.index;
      if (a < 0 || static_cast<std::size_t>(a) >= annotators.size()) {
        throw DataError("sentence '" + s.id + "' references undeclared annotator " +
                        std::to_string(a));
      }
      if (a <= prev) {
        throw DataError("sentence '" + s.id + "' has duplicate or unsorted annotator entries");
      }
      prev = a;
      if (seq.tags.size() != s.tokens.size()) {
        throw DataError("sentence '" + s.id + "': label length mismatch for annotator " +
                        annotators[static_cast<std::size_t>(a)]);
      }
      for (const auto& t : seq.tags) tagset.id(t);
      if (!is_valid_bio(seq.tags)) throw DataError("sentence '" + s.id + "': invalid BIO");
    }
    if (expert[i]) {
      if (!expert[i]->annotator.is_expert() || expert[i]->tags.size() != s.tokens.size()) {
        throw DataError("sentence '" + s.id + "': malformed expert labels");
      }
      for (const auto& t : expert[i]->tags) tagset.id(t);
      if (!is_valid_bio(expert[i]->tags)) {
        throw DataError("sentence '" + s.id + "': invalid expert BIO");
      }
    }
  }
}

CrowdCorpus parse_corpus(std::istream& in, const FormatSpec& format, const Tagset& tagset,
                         const std::string& source) {
  return CorpusReader(format, tagset, source).read(in);
}

CrowdCorpus parse_corpus(const std::string& path, const FormatSpec& format, const Tagset& tagset) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path);
  return parse_corpus(in, format, tagset, path);
}

void write_corpus(const CrowdCorpus& corpus, std::ostream& out) {
  bool default_names = true;
  for (std::size_t a = 0; a < corpus.annotators.size(); ++a) {
    default_names = default_names && corpus.annotators[a] == default_annotator_name(a);
  }
  if (!default_names) {
    out << kAnnotatorsDirective;
    for (std::size_t a = 0; a < corpus.annotators.size(); ++a) {
      out << (a ? " " : "") << corpus.annotators[a];
    }
    out << '\n';
  }
  const bool expert_column =
      corpus.annotators.empty() ||
      std::any_of(corpus.expert.begin(), corpus.expert.end(), [](const auto& e) { return e.has_value(); });
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (i) out << '\n';
    const auto& s = corpus.sentences[i];
    if (s.id != default_sentence_id(i)) out << kIdDirective << s.id << '\n';
    std::vector<const LabelSequence*> cols(corpus.annotators.size(), nullptr);
    for (const auto& seq : corpus.annotations[i]) {
      cols[static_cast<std::size_t>(seq.annotator.index)] = &seq;
    }
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t];
      for (const auto* seq : cols) out << '\t' << (seq ? seq->tags[t] : std::string(kMissing));
      if (expert_column) {
        out << '\t' << (corpus.expert[i] ? corpus.expert[i]->tags[t] : std::string(kMissing));
      }
      out << '\n';
    }
  }
}

void write_corpus(const CrowdCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus " + path);
  write_corpus(corpus, out);
}

CrowdCorpus subset(const CrowdCorpus& corpus, std::span<const std::size_t> indices) {
  CrowdCorpus out;
  out.tagset = corpus.tagset;
  out.annotators = corpus.annotators;
  for (std::size_t i : indices) {
    out.sentences.push_back(corpus.sentences.at(i));
    out.annotations.push_back(corpus.annotations[i]);
    out.expert.push_back(corpus.expert[i]);
  }
  return out;
}

std::vector<CrowdCorpus> split_corpus(const CrowdCorpus& corpus, std::span<const double> fractions,
                                      std::uint64_t seed) {
  if (corpus.size() == 0) throw DataError("cannot split an empty corpus");
  if (fractions.empty()) throw UsageError("split needs at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw UsageError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split fractions must sum to 1");

  const std::size_t n = corpus.size();
  std::vector<std::size_t> sizes(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t p = 1; p < fractions.size(); ++p) {
    sizes[p] = static_cast<std::size_t>(std::llround(fractions[p] * static_cast<double>(n)));
    assigned += sizes[p];
  }
  if (assigned > n) throw UsageError("split fractions leave no room for the first part");
  sizes[0] = n - assigned;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<CrowdCorpus> parts;
  std::size_t cursor = 0;
  for (std::size_t size : sizes) {
    std::vector<std::size_t> idx(order.begin() + static_cast<long>(cursor),
                                 order.begin() + static_cast<long>(cursor + size));
    std::sort(idx.begin(), idx.end());
    parts.push_back(subset(corpus, idx));
    cursor += size;
  }
  return parts;
}

}  // namespace crowdner
