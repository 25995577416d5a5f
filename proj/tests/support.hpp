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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crowdner/common.hpp"
#include "crowdner/corpus.hpp"

namespace crowdner::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("crowdner_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Mat<double> random_matrix(long rows, long cols, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> d(0.0, stddev);
  Mat<double> m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

/// Small integers, so that many sequence scores tie exactly.
inline Mat<double> integer_matrix(long rows, long cols, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-2, 2);
  Mat<double> m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

/// Every tag sequence of length n over k tags, first position most
/// significant.
inline std::vector<std::vector<int>> all_sequences(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> y(static_cast<std::size_t>(n), 0);
  while (true) {
    out.push_back(y);
    int i = n - 1;
    while (i >= 0 && ++y[static_cast<std::size_t>(i)] == k) y[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
  }
  return out;
}

/// Direct evaluation of T[start, y1] + o1[y1] + sum_i (T[y_{i-1}, y_i] + o_i[y_i]).
inline double brute_score(const Mat<double>& o, const Mat<double>& trans, const std::vector<int>& y) {
  const long k = o.cols();
  double s = trans(k, y[0]) + o(0, y[0]);
  for (std::size_t i = 1; i < y.size(); ++i) {
    s = (s + trans(y[i - 1], y[i])) + o(static_cast<long>(i), y[i]);
  }
  return s;
}

inline double brute_log_partition(const Mat<double>& o, const Mat<double>& trans) {
  const auto seqs = all_sequences(static_cast<int>(o.rows()), static_cast<int>(o.cols()));
  double m = -INFINITY;
  std::vector<double> scores;
  for (const auto& y : seqs) {
    scores.push_back(brute_score(o, trans, y));
    m = std::max(m, scores.back());
  }
  long double acc = 0.0L;
  for (double s : scores) acc += std::exp(static_cast<long double>(s - m));
  return m + static_cast<double>(std::log(acc));
}

/// Best sequence; among exact ties, the one that is smallest when compared
/// from the last position backwards (the lowest-index back-pointer rule).
inline std::vector<int> brute_viterbi(const Mat<double>& o, const Mat<double>& trans, double* best = nullptr) {
  std::vector<int> arg;
  double top = -INFINITY;
  for (const auto& y : all_sequences(static_cast<int>(o.rows()), static_cast<int>(o.cols()))) {
    const double s = brute_score(o, trans, y);
    const bool better = s > top;
    const bool tie_wins = s == top && std::lexicographical_compare(y.rbegin(), y.rend(), arg.rbegin(), arg.rend());
    if (better || tie_wins) {
      top = s;
      arg = y;
    }
  }
  if (best) *best = top;
  return arg;
}

/// Builds a corpus from whitespace-joined token and tag strings. `crowd[i]`
/// lists (annotator, tags) pairs for sentence i.
struct SentenceSpec {
  std::string tokens;
  std::vector<std::pair<int, std::string>> crowd;
  std::string expert;  // empty for none
};

inline std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline CrowdCorpus make_corpus(const Tagset& tagset, std::size_t num_annotators,
                               const std::vector<SentenceSpec>& sentences) {
  CrowdCorpus c;
  c.tagset = tagset;
  for (std::size_t a = 0; a < num_annotators; ++a) c.annotators.push_back(default_annotator_name(a));
  for (const auto& s : sentences) {
    const std::size_t i = c.add_sentence({default_sentence_id(c.size()), words(s.tokens)});
    for (const auto& [a, tags] : s.crowd) c.annotations[i].push_back({AnnotatorId{a}, words(tags)});
    if (!s.expert.empty()) c.expert[i] = LabelSequence{AnnotatorId::expert(), words(s.expert)};
  }
  c.validate();
  return c;
}

}  // namespace crowdner::testing
