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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crowdner/bio.hpp"
#include "crowdner/common.hpp"

namespace crowdner {

/// Published full-scale F1 scores (pretrained BERT-base encoder on the
/// crowdsourced CoNLL-2003 release). Kept for reference; desk-scale runs do
/// not reproduce them.
namespace reference {
inline constexpr double kUnsupervisedF1 = 77.95;
inline constexpr double kSupervisedFullExpertF1 = 90.06;
}  // namespace reference

struct SpanCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  /// Percentages; 0 when the denominator is 0.
  double precision() const;
  double recall() const;
  double f1() const;
};

/// Entity-level exact-match scores, micro-averaged over the corpus.
struct ScoreReport {
  SpanCounts total;
  std::map<std::string, SpanCounts> per_type;

  double precision() const { return total.precision(); }
  double recall() const { return total.recall(); }
  double f1() const { return total.f1(); }

  /// Aligned plain-text table with two-decimal percentages.
  std::string to_text() const;
  /// type,gold,predicted,correct,precision,recall,f1 with an "overall" row.
  std::string to_csv() const;
};

/// A predicted span counts as correct iff (start, end, type) matches a gold
/// span. Both sides must be valid BIO. Throws DataError on a length mismatch.
ScoreReport evaluate(std::span<const std::vector<std::string>> predictions,
                     std::span<const std::vector<std::string>> gold);

/// Two-sided paired t-test on per-run scores. Zero-variance differences give
/// 1.0 when the mean difference is zero and 0.0 otherwise.
double paired_t_test(std::span<const double> a, std::span<const double> b);

/// Student t statistic of the paired differences (for reporting).
double paired_t_statistic(std::span<const double> a, std::span<const double> b);

struct PcaResult {
  Mat<double> coords;        // M x k
  Vec<double> explained;     // k explained-variance ratios
  Mat<double> components;    // k x d, unit rows
  RowVec<double> mean;       // 1 x d

  /// Projects extra rows with the fitted mean and components.
  Mat<double> project(const Mat<double>& rows) const;
};

/// Covariance eigendecomposition. Each component is signed so that its
/// largest-magnitude entry is positive. Throws UsageError for M < 2 or k > d.
PcaResult pca_project(const Mat<double>& embeddings, int k = 2);

}  // namespace crowdner
