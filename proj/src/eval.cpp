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

#include "crowdner/eval.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace crowdner {

double SpanCounts::precision() const {
  return predicted == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(predicted);
}

double SpanCounts::recall() const {
  return gold == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(gold);
}

double SpanCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

std::string ScoreReport::to_text() const {
  std::string out = fmt::format("{:<10}{:>8}{:>8}{:>8}{:>9}{:>9}{:>9}\n", "type", "gold", "pred",
                                "correct", "P", "R", "F1");
  auto row = [&](const std::string& name, const SpanCounts& c) {
    out += fmt::format("{:<10}{:>8}{:>8}{:>8}{:>9.2f}{:>9.2f}{:>9.2f}\n", name, c.gold, c.predicted,
                       c.correct, c.precision(), c.recall(), c.f1());
  };
  for (const auto& [type, counts] : per_type) row(type, counts);
  row("overall", total);
  return out;
}

std::string ScoreReport::to_csv() const {
  std::string out = "type,gold,predicted,correct,precision,recall,f1\n";
  auto row = [&](const std::string& name, const SpanCounts& c) {
    out += fmt::format("{},{},{},{},{:.2f},{:.2f},{:.2f}\n", name, c.gold, c.predicted, c.correct,
                       c.precision(), c.recall(), c.f1());
  };
  for (const auto& [type, counts] : per_type) row(type, counts);
  row("overall", total);
  return out;
}

ScoreReport evaluate(std::span<const std::vector<std::string>> predictions,
                     std::span<const std::vector<std::string>> gold) {
  if (predictions.size() != gold.size()) {
    throw DataError("evaluate: " + std::to_string(predictions.size()) + " predicted sentences vs " +
                    std::to_string(gold.size()) + " gold sentences");
  }
  ScoreReport report;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i].size() != gold[i].size()) {
      throw DataError("evaluate: length mismatch in sentence " + std::to_string(i));
    }
    const auto g = extract_spans(gold[i]);
    const auto p = extract_spans(predictions[i]);
    const std::set<EntitySpan> gold_set(g.begin(), g.end());
    for (const auto& s : g) {
      ++report.total.gold;
      ++report.per_type[s.type].gold;
    }
    for (const auto& s : p) {
      ++report.total.predicted;
      auto& c = report.per_type[s.type];
      ++c.predicted;
      if (gold_set.count(s)) {
        ++report.total.correct;
        ++c.correct;
      }
    }
  }
  return report;
}

namespace {

struct DiffStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

DiffStats diff_stats(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("paired t-test needs equal-length score lists");
  if (a.size() < 2) throw UsageError("paired t-test needs at least two runs");
  DiffStats s;
  s.n = a.size();
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : d) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

}  // namespace

double paired_t_statistic(std::span<const double> a, std::span<const double> b) {
  const DiffStats s = diff_stats(a, b);
  return s.mean / (s.sd / std::sqrt(static_cast<double>(s.n)));
}

double paired_t_test(std::span<const double> a, std::span<const double> b) {
  const DiffStats s = diff_stats(a, b);
  if (s.sd == 0.0) return s.mean == 0.0 ? 1.0 : 0.0;
  const double t = s.mean / (s.sd / std::sqrt(static_cast<double>(s.n)));
  const double df = static_cast<double>(s.n - 1);
  // Two-sided tail: P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2).
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

Mat<double> PcaResult::project(const Mat<double>& rows) const {
  Mat<double> centered = rows.rowwise() - mean;
  return centered * components.transpose();
}

PcaResult pca_project(const Mat<double>& embeddings, int k) {
  const long m = embeddings.rows();
  const long d = embeddings.cols();
  if (m < 2) throw UsageError("PCA needs at least two rows");
  if (k < 1 || k > d) throw UsageError("PCA component count must lie in [1, d]");
  PcaResult r;
  r.mean = embeddings.colwise().mean();
  const Mat<double> centered = embeddings.rowwise() - r.mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();
  r.components.resize(k, d);
  r.explained.resize(k);
  for (int c = 0; c < k; ++c) {
    const long idx = d - 1 - c;  // eigenvalues ascend
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    r.components.row(c) = v.transpose();
    r.explained(c) = total > 0.0 ? values(idx) / total : 0.0;
  }
  r.coords = centered * r.components.transpose();
  return r;
}

}  // namespace crowdner
