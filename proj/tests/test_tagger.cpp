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

#include <doctest.h>

#include <cmath>
#include <random>

#include "crowdner/crf.hpp"
#include "crowdner/lstm.hpp"
#include "support.hpp"

using namespace crowdner;
using namespace crowdner::testing;

namespace {

const Mat<double> kO{{1.0, 2.0}, {0.5, 0.0}};
// Rows O, B, then the virtual start row.
const Mat<double> kT{{0.1, 0.2}, {0.3, 0.4}, {0.0, 0.0}};

double rel_err(const Mat<double>& a, const Mat<double>& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

struct RandomLstm {
  Mat<double> w, u, b;
  RandomLstm(long d, long h, std::mt19937_64& rng, double s = 0.5)
      : w(random_matrix(4 * h, d, rng, s)), u(random_matrix(4 * h, h, rng, s)), b(random_matrix(1, 4 * h, rng, s)) {}
  LstmWeights<double> weights() const { return {w, u, b}; }
};

}  // namespace

TEST_CASE("sequence_score on the worked instance") {
  const std::vector<int> bo = {1, 0}, oo = {0, 0};
  CHECK(sequence_score<double>(kO, kT, bo) == doctest::Approx(2.8).epsilon(1e-12));
  CHECK(sequence_score<double>(kO, kT, oo) == doctest::Approx(1.6).epsilon(1e-12));
  const Mat<double> first = kO.topRows(1);
  const std::vector<int> o = {0};
  CHECK(sequence_score<double>(first, kT, o) == 1.0);
  const std::vector<int> bad = {2, 0};
  CHECK_THROWS(sequence_score<double>(kO, kT, bad));
}

TEST_CASE("log_partition, loss and Viterbi on the worked instance") {
  const double logz = std::log(std::exp(1.6) + std::exp(1.2) + std::exp(2.8) + std::exp(2.4));
  CHECK(log_partition<double>(kO, kT) == doctest::Approx(logz).epsilon(1e-12));
  CHECK(log_partition<double>(kO, kT) == doctest::Approx(3.576).epsilon(1e-3));
  const std::vector<int> bo = {1, 0};
  CHECK(nll_loss<double>(kO, kT, bo) == doctest::Approx(0.776).epsilon(1e-3));
  const auto best = viterbi_decode<double>(kO, kT);
  CHECK(best.tags == bo);
  CHECK(best.score == doctest::Approx(2.8).epsilon(1e-12));
}

TEST_CASE("single-tag CRF has exactly one path") {
  std::mt19937_64 rng(2);
  const Mat<double> o = random_matrix(4, 1, rng), t = random_matrix(2, 1, rng);
  const std::vector<int> only = {0, 0, 0, 0};
  CHECK(log_partition<double>(o, t) == doctest::Approx(sequence_score<double>(o, t, only)).epsilon(1e-12));
  CHECK(nll_loss<double>(o, t, only) == 0.0);
}

TEST_CASE("log_partition shifts by a constant added to one emission row") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat<double> o = random_matrix(5, 3, rng), t = random_matrix(4, 3, rng);
    Mat<double> shifted = o;
    const long row = trial % 5;
    shifted.row(row).array() += 2.5;
    CHECK(log_partition<double>(shifted, t) == doctest::Approx(log_partition<double>(o, t) + 2.5).epsilon(1e-12));
  }
}

TEST_CASE("log_partition is stable for large scores") {
  std::mt19937_64 rng(6);
  const Mat<double> o = random_matrix(6, 3, rng, 1e4), t = random_matrix(4, 3, rng, 1e4);
  const double z = log_partition<double>(o, t);
  CHECK(std::isfinite(z));
  CHECK(z == doctest::Approx(brute_log_partition(o, t)).epsilon(1e-12));
}

TEST_CASE("CRF agrees with brute-force enumeration") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 5, k = 1 + (trial / 5) % 4;
    const bool ints = trial % 2 == 0;
    const Mat<double> o = ints ? integer_matrix(n, k, rng) : random_matrix(n, k, rng);
    const Mat<double> t = ints ? integer_matrix(k + 1, k, rng) : random_matrix(k + 1, k, rng);
    CHECK(std::abs(log_partition<double>(o, t) - brute_log_partition(o, t)) < 1e-8);
    double best = 0.0;
    const auto expected = brute_viterbi(o, t, &best);
    const auto got = viterbi_decode<double>(o, t);
    CHECK(got.tags == expected);
    CHECK(got.score == best);
  }
  const Mat<double> flat = Mat<double>::Zero(4, 3);
  const Mat<double> flat_t = Mat<double>::Zero(4, 3);
  CHECK(viterbi_decode<double>(flat, flat_t).tags == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("probabilities normalise and the loss is non-negative") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + trial % 5, k = 1 + (trial / 5) % 4;
    const Mat<double> o = random_matrix(n, k, rng, 2.0), t = random_matrix(k + 1, k, rng, 2.0);
    const double z = log_partition<double>(o, t);
    std::vector<int> gold(static_cast<std::size_t>(n));
    for (auto& g : gold) g = static_cast<int>(rng() % static_cast<unsigned>(k));
    CHECK(nll_loss<double>(o, t, gold) >= 0.0);
    if (trial < 100) {
      double total = 0.0;
      for (const auto& y : all_sequences(n, k)) total += std::exp(brute_score(o, t, y) - z);
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
  // A gold path holding all the mass gives a loss of zero.
  Mat<double> o = Mat<double>::Constant(3, 2, -1e3);
  o(0, 1) = o(1, 0) = o(2, 1) = 0.0;
  const std::vector<int> gold = {1, 0, 1};
  CHECK(nll_loss<double>(o, Mat<double>::Zero(3, 2), gold) < 1e-9);
}

TEST_CASE("CRF gradients equal marginals minus indicators") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 5, k = 2 + trial % 3;
    const Mat<double> o = random_matrix(n, k, rng), t = random_matrix(k + 1, k, rng);
    std::vector<int> gold(static_cast<std::size_t>(n));
    for (auto& g : gold) g = static_cast<int>(rng() % static_cast<unsigned>(k));
    Mat<double> d_o, d_t;
    const double loss = nll_gradient<double>(o, t, gold, d_o, d_t);
    CHECK(loss == doctest::Approx(nll_loss<double>(o, t, gold)).epsilon(1e-12));

    const double z = brute_log_partition(o, t);
    Mat<double> marg = Mat<double>::Zero(n, k);
    for (const auto& y : all_sequences(n, k)) {
      const double p = std::exp(brute_score(o, t, y) - z);
      for (int i = 0; i < n; ++i) marg(i, y[static_cast<std::size_t>(i)]) += p;
    }
    CHECK((tag_marginals<double>(o, t) - marg).cwiseAbs().maxCoeff() < 1e-10);
    Mat<double> expected = marg;
    for (int i = 0; i < n; ++i) expected(i, gold[static_cast<std::size_t>(i)]) -= 1.0;
    CHECK((d_o - expected).cwiseAbs().maxCoeff() < 1e-10);

    Mat<double> num_o(n, k), num_t(k + 1, k);
    for (long i = 0; i < o.size(); ++i) {
      Mat<double> up = o, down = o;
      up.data()[i] += 1e-5;
      down.data()[i] -= 1e-5;
      num_o.data()[i] = (nll_loss<double>(up, t, gold) - nll_loss<double>(down, t, gold)) / 2e-5;
    }
    for (long i = 0; i < t.size(); ++i) {
      Mat<double> up = t, down = t;
      up.data()[i] += 1e-5;
      down.data()[i] -= 1e-5;
      num_t.data()[i] = (nll_loss<double>(o, up, gold) - nll_loss<double>(o, down, gold)) / 2e-5;
    }
    CHECK(rel_err(d_o, num_o) < 1e-4);
    CHECK(rel_err(d_t, num_t) < 1e-4);
  }
}

TEST_CASE("emission scores are an affine map") {
  const Mat<double> h{{1.0, 2.0}, {3.0, 4.0}};
  const Mat<double> w{{1.0, 0.5}, {-1.0, 2.0}};
  const Mat<double> b{{0.1, -0.2}};
  const Mat<double> o = emission_scores<double>(h, w, b);
  CHECK(o(0, 0) == doctest::Approx(2.1));
  CHECK(o(0, 1) == doctest::Approx(2.8));
  CHECK(o(1, 0) == doctest::Approx(5.1));
  CHECK(o(1, 1) == doctest::Approx(4.8));
  const Mat<double> zero = emission_scores<double>(h, Mat<double>::Zero(2, 2), b);
  CHECK(zero.row(0) == b);
  CHECK(zero.row(1) == b);
  CHECK(emission_scores<double>(h, Mat<double>::Ones(1, 2), Mat<double>::Zero(1, 1)).cols() == 1);
  CHECK_THROWS(emission_scores<double>(h, Mat<double>::Zero(2, 3), b));
}

TEST_CASE("BiLSTM shapes, zero weights and direction symmetry") {
  std::mt19937_64 rng(14);
  const RandomLstm fw(3, 4, rng), bw(3, 4, rng);
  const Mat<double> x1 = random_matrix(1, 3, rng);
  CHECK(bilstm_encode<double>(x1, fw.weights(), bw.weights()).cols() == 8);
  const Mat<double> zw = Mat<double>::Zero(16, 3), zu = Mat<double>::Zero(16, 4), zb = Mat<double>::Zero(1, 16);
  const LstmWeights<double> zero{zw, zu, zb};
  CHECK(bilstm_encode<double>(Mat<double>::Zero(5, 3), zero, zero).isZero());

  const Mat<double> x = random_matrix(5, 3, rng);
  const Mat<double> rev = x.colwise().reverse();
  const Mat<double> a = bilstm_encode<double>(x, fw.weights(), bw.weights());
  const Mat<double> b = bilstm_encode<double>(rev, bw.weights(), fw.weights());
  const Mat<double> b_rev = b.colwise().reverse();
  CHECK((a.leftCols(4) - b_rev.rightCols(4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.rightCols(4) - b_rev.leftCols(4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LSTM backward matches finite differences") {
  std::mt19937_64 rng(16);
  for (bool reverse : {false, true}) {
    RandomLstm p(3, 2, rng);
    const Mat<double> x = random_matrix(4, 3, rng);
    const Mat<double> g = random_matrix(4, 2, rng);
    auto f = [&](const Mat<double>& xx) {
      return (lstm_forward<double>(xx, p.weights(), reverse, nullptr).array() * g.array()).sum();
    };
    LstmTrace<double> trace;
    lstm_forward<double>(x, p.weights(), reverse, &trace);
    Mat<double> dw = Mat<double>::Zero(p.w.rows(), p.w.cols());
    Mat<double> du = Mat<double>::Zero(p.u.rows(), p.u.cols());
    Mat<double> db = Mat<double>::Zero(1, p.b.cols());
    const Mat<double> dx = lstm_backward<double>(x, p.weights(), reverse, trace, g, dw, du, db);

    auto numeric = [&](Mat<double>& param) {
      Mat<double> out(param.rows(), param.cols());
      for (long i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + 1e-5;
        const double up = f(x);
        param.data()[i] = saved - 1e-5;
        const double down = f(x);
        param.data()[i] = saved;
        out.data()[i] = (up - down) / 2e-5;
      }
      return out;
    };
    Mat<double> xx = x;
    Mat<double> num_x(x.rows(), x.cols());
    for (long i = 0; i < x.size(); ++i) {
      Mat<double> up = x, down = x;
      up.data()[i] += 1e-5;
      down.data()[i] -= 1e-5;
      num_x.data()[i] = (f(up) - f(down)) / 2e-5;
    }
    CHECK(rel_err(dw, numeric(p.w)) < 1e-6);
    CHECK(rel_err(du, numeric(p.u)) < 1e-6);
    CHECK(rel_err(db, numeric(p.b)) < 1e-6);
    CHECK(rel_err(dx, num_x) < 1e-6);
  }
}
