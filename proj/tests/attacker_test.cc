// tests/attacker_test.cc

// Copyright 2026  The hsaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hsaudit/attacker.h"
#include "hsaudit/metrics.h"
#include "hsaudit/synth.h"
#include "test_util.h"

using namespace hsaudit;

namespace {

// Samples n_classes x per_class embeddings from a two-covariance model.
void sample_plda(const Vector& mu, const Matrix& b, const Matrix& w, int n_classes, int per_class,
                 std::uint64_t seed, Matrix* embs, std::vector<int>* labels) {
  Rng rng(seed);
  const Matrix lb = Eigen::LLT<Matrix>(b).matrixL();
  const Matrix lw = Eigen::LLT<Matrix>(w).matrixL();
  embs->resize(n_classes * per_class, mu.size());
  labels->clear();
  for (int c = 0; c < n_classes; ++c) {
    const Vector y = mu + lb * rng.normal_vector(mu.size());
    for (int j = 0; j < per_class; ++j) {
      embs->row(c * per_class + j) = (y + lw * rng.normal_vector(mu.size())).transpose();
      labels->push_back(c);
    }
  }
}

double log_normal(const Vector& x, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Matrix l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * (x.size() * std::log(2 * std::numbers::pi) + logdet + x.dot(llt.solve(x)));
}

// Marginal likelihood from the full joint covariance of each class block.
double brute_force_loglik(const PldaModel& m, const Matrix& embs, const std::vector<int>& labels) {
  std::map<int, std::vector<int>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) rows[labels[i]].push_back(static_cast<int>(i));
  const int k = static_cast<int>(m.dim());
  double total = 0.0;
  for (const auto& [c, idx] : rows) {
    const int n = static_cast<int>(idx.size());
    Matrix cov(n * k, n * k);
    Vector x(n * k);
    for (int a = 0; a < n; ++a) {
      x.segment(a * k, k) = embs.row(idx[a]).transpose() - m.mu;
      for (int b = 0; b < n; ++b)
        cov.block(a * k, b * k, k, k) = m.between_cov + (a == b ? m.within_cov : Matrix::Zero(k, k));
    }
    total += log_normal(x, cov);
  }
  return total;
}

double rel_frobenius(const Matrix& est, const Matrix& truth) {
  return (est - truth).norm() / truth.norm();
}

}  // namespace

TEST_CASE("pool_stats matches a per-column loop") {
  Matrix f(2, 2);
  f << 1, 3, 3, 5;
  const Vector v = pool_stats({f, 12.5}).vector;
  CHECK(v.size() == 4);
  CHECK(v(0) == 2);
  CHECK(v(1) == 4);
  CHECK(v(2) == 1);
  CHECK(v(3) == 1);

  Matrix one(1, 2);
  one << 7, 7;
  CHECK(pool_stats({one, 12.5}).vector == (Vector(4) << 7, 7, 0, 0).finished());

  Rng rng(2);
  const Matrix r = rng.normal_matrix(9, 5);
  const Vector p = pool_stats({r, 12.5}).vector;
  for (int c = 0; c < 5; ++c) {
    double mean = 0;
    for (int t = 0; t < 9; ++t) mean += r(t, c);
    mean /= 9;
    double var = 0;
    for (int t = 0; t < 9; ++t) var += (r(t, c) - mean) * (r(t, c) - mean);
    CHECK(p(c) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(p(5 + c) == doctest::Approx(std::sqrt(var / 9)).epsilon(1e-12));
  }
  CHECK(pool_stats({Matrix::Constant(4, 3, 2.5), 12.5}).vector.tail(3).isZero());
  CHECK_THROWS_AS(pool_stats({Matrix(0, 3), 12.5}), DataError);
}

TEST_CASE("whitening") {
  Rng rng(5);
  const Matrix mix = rng.normal_matrix(10, 10);
  const Matrix x = rng.normal_matrix(200, 10) * mix;
  const Whitener w = fit_whitener(x, 0.0);
  const Matrix y = w.apply_rows(x);
  const Matrix centered = y.rowwise() - y.colwise().mean();
  const Matrix cov = centered.transpose() * centered / 199.0;
  CHECK((cov - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-9);
  const Matrix yr = fit_whitener(x, 1e-6).apply_rows(x);
  const Matrix cr = (yr.rowwise() - yr.colwise().mean()).transpose() *
                    (yr.rowwise() - yr.colwise().mean()) / 199.0;
  CHECK((cr - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((w.transform - w.transform.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  // Idempotence: whitening whitened data is the identity map.
  const Whitener again = fit_whitener(fit_whitener(x, 0.0).apply_rows(x), 0.0);
  CHECK((again.transform - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-5);

  const Matrix same = Matrix::Ones(2, 3);
  CHECK_THROWS_WITH_AS(fit_whitener(same, 0.0), doctest::Contains("ridge > 0"), NumericError);
  CHECK_NOTHROW(fit_whitener(same, 1e-3));
  CHECK_THROWS_AS(fit_whitener(Matrix::Ones(1, 3), 1e-3), DataError);
}

TEST_CASE("LDA on two classes recovers the Fisher direction") {
  Rng rng(8);
  const int n = 400;
  Matrix x(2 * n, 2);
  std::vector<int> labels;
  for (int i = 0; i < 2 * n; ++i) {
    const int c = i < n ? 0 : 1;
    x(i, 0) = (c ? 3.0 : -3.0) + rng.normal();
    x(i, 1) = rng.normal();
    labels.push_back(c);
  }
  const LdaProjection lda = fit_lda(x, labels, 1);
  // Two-class LDA direction is S_w^-1 (mu_1 - mu_0).
  const ScatterStats st = scatter_stats(x, labels);
  const Vector diff = x.bottomRows(n).colwise().mean() - x.topRows(n).colwise().mean();
  const Vector fisher = st.within.ldlt().solve(diff);
  const double cosine = std::abs(lda.basis.col(0).dot(fisher)) / (lda.basis.col(0).norm() * fisher.norm());
  CHECK(cosine > 1 - 1e-9);
  CHECK(lda.basis(0, 0) > 0);  // largest entry positive
  CHECK((lda.basis.transpose() * st.within * lda.basis)(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(fit_lda(x, labels, 2), ConfigError);
}

TEST_CASE("LDA subspace ignores label names") {
  Rng rng(9);
  Matrix x(60, 4);
  std::vector<int> labels, renamed;
  for (int i = 0; i < 60; ++i) {
    const int c = i % 4;
    x.row(i) = rng.normal_vector(4).transpose();
    x(i, c) += 4.0;
    labels.push_back(c);
    renamed.push_back(10 * (3 - c));
  }
  const Matrix a = fit_lda(x, labels, 2).basis;
  const Matrix b = fit_lda(x, renamed, 2).basis;
  CHECK(((a * a.transpose()) - (b * b.transpose())).cwiseAbs().maxCoeff() < 1e-9);
  const ScatterStats st = scatter_stats(x, labels);
  CHECK((a.transpose() * st.within * a - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(fit_lda(x, labels, 4), ConfigError);
}

TEST_CASE("PLDA log-likelihood agrees with the full joint Gaussian") {
  Matrix x;
  std::vector<int> labels;
  Vector mu(3);
  mu << 1, -1, 0.5;
  Matrix b = Matrix::Identity(3, 3) * 2.0;
  b(0, 1) = b(1, 0) = 0.5;
  sample_plda(mu, b, Matrix::Identity(3, 3), 6, 4, 3, &x, &labels);
  labels.push_back(0);  // one larger class
  x.conservativeResize(x.rows() + 1, Eigen::NoChange);
  x.row(x.rows() - 1) = x.row(0) * 0.5;
  const PldaModel m = fit_plda(x, labels, 3);
  CHECK(plda_loglik(m, x, labels) == doctest::Approx(brute_force_loglik(m, x, labels)).epsilon(1e-10));
}

TEST_CASE("PLDA EM is monotone and recovers parameters") {
  Matrix x;
  std::vector<int> labels;
  const Vector mu = Vector::Zero(2);
  const Matrix b0 = Matrix::Identity(2, 2) * 4.0, w0 = Matrix::Identity(2, 2);
  sample_plda(mu, b0, w0, 500, 10, 17, &x, &labels);
  const PldaModel m = fit_plda(x, labels, 50);
  REQUIRE(m.em_loglik_trace.size() == 50);
  for (std::size_t i = 1; i < m.em_loglik_trace.size(); ++i)
    CHECK(m.em_loglik_trace[i] >= m.em_loglik_trace[i - 1] - 1e-8);
  CHECK(rel_frobenius(m.between_cov, b0) <= 0.10);
  CHECK(rel_frobenius(m.within_cov, w0) <= 0.10);

  const PldaModel one = fit_plda(x, labels, 1);
  const PldaModel two = fit_plda(x, labels, 2);
  CHECK(two.em_loglik_trace.back() >= one.em_loglik_trace.back());
  CHECK(one.em_loglik_trace[0] == two.em_loglik_trace[0]);
}

TEST_CASE("PLDA preconditions") {
  Matrix x = Matrix::Random(5, 2);
  CHECK_THROWS_WITH_AS(fit_plda(x, std::vector<int>{0, 0, 1, 1, 2}, 3), doctest::Contains("singleton"),
                       DataError);
  CHECK_THROWS_AS(fit_plda(Matrix::Ones(4, 2), std::vector<int>{0, 0, 1, 1}, 3), NumericError);
  CHECK_THROWS_AS(fit_plda(x.topRows(4), std::vector<int>{0, 0, 1, 1}, 0), ConfigError);
}

TEST_CASE("verification LLR") {
  PldaModel m;
  m.mu = Vector::Zero(1);
  m.between_cov = Matrix::Ones(1, 1);
  m.within_cov = Matrix::Ones(1, 1);
  const Vector one = Vector::Ones(1);
  // Same speaker: joint covariance [[2,1],[1,2]]; different: 2 I.
  Matrix same(2, 2);
  same << 2, 1, 1, 2;
  const Vector pair = Vector::Ones(2);
  const double expected = log_normal(pair, same) - log_normal(pair, 2 * Matrix::Identity(2, 2));
  CHECK(score_trial(m, one, one) == doctest::Approx(expected).epsilon(1e-12));

  Rng rng(1);
  PldaModel r;
  r.mu = rng.normal_vector(4);
  const Matrix g = rng.normal_matrix(4, 4);
  r.between_cov = g * g.transpose();
  r.within_cov = Matrix::Identity(4, 4) + 0.1 * r.between_cov;
  for (int i = 0; i < 20; ++i) {
    const Vector a = rng.normal_vector(4), b = rng.normal_vector(4);
    CHECK(score_trial(r, a, b) == score_trial(r, b, a));
    Matrix joint_same(8, 8), joint_diff = Matrix::Zero(8, 8);
    const Matrix t = r.between_cov + r.within_cov;
    joint_same << t, r.between_cov, r.between_cov, t;
    joint_diff.topLeftCorner(4, 4) = t;
    joint_diff.bottomRightCorner(4, 4) = t;
    Vector x(8);
    x << a - r.mu, b - r.mu;
    CHECK(score_trial(r, a, b) ==
          doctest::Approx(log_normal(x, joint_same) - log_normal(x, joint_diff)).epsilon(1e-9));
  }

  PldaModel flat = r;
  flat.between_cov.setZero();
  CHECK(score_trial(flat, rng.normal_vector(4), rng.normal_vector(4)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(score_trial(r, Vector::Zero(3), Vector::Zero(4)), DataError);
}

namespace {

Dataset training_population(std::optional<AnonConfig> anon = std::nullopt) {
  SynthConfig t;
  t.n_speakers = 256;
  t.speaker_prefix = "trn";
  t.seed = 1001;
  t.layers = {LayerKind::MeanPooledAll};
  Dataset d = gen_population(t, Split::AttackerTrain);
  return anon ? apply_anon(d, t, *anon, 5) : d;
}

Dataset eval_population() {
  SynthConfig e;
  e.layers = {LayerKind::MeanPooledAll};
  return gen_population(e, Split::Trial);
}

}  // namespace

TEST_CASE("attacker on clean synthetic data") {
  const Dataset train = training_population();
  const Attacker atk = train_attacker(train, {});
  CHECK(atk.whitener.transform.rows() == 64);
  CHECK(atk.lda.basis.cols() == 64);

  const auto [enroll, test] = split_enroll_trial(eval_population());
  const TrialList trials = make_trials(enroll, test);
  const ScoreSet s = score_trials(atk, enroll, test, trials);
  CHECK(compute_eer(s).eer < 0.10);

  const Attacker again = train_attacker(train, {});
  CHECK(again.plda.between_cov == atk.plda.between_cov);
  CHECK(again.plda.within_cov == atk.plda.within_cov);

  std::stringstream io;
  save_attacker(atk, io);
  const Attacker loaded = load_attacker(io);
  CHECK(score_trials(loaded, enroll, test, trials).mated == s.mated);

  TrialList two{{trials.trials.front(), trials.trials.back()}};
  const ScoreSet small = score_trials(atk, enroll, test, two);
  CHECK(small.mated.size() + small.non_mated.size() == 2);
  std::reverse(two.trials.begin(), two.trials.end());
  const ScoreSet flipped = score_trials(atk, enroll, test, two);
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sorted(flipped.mated) == sorted(small.mated));
  CHECK(sorted(flipped.non_mated) == sorted(small.non_mated));

  two.trials[0].test_id = "missing";
  CHECK_THROWS_WITH_AS(score_trials(atk, enroll, test, two), doctest::Contains("missing"), DataError);
}

TEST_CASE("attacker training preconditions") {
  Dataset train = training_population();
  AttackerConfig lazy;
  lazy.condition = TrainingCondition::LazyInformed;
  CHECK_THROWS_AS(train_attacker(train, lazy), ConfigError);
  train.split = Split::Trial;
  CHECK_THROWS_AS(train_attacker(train, {}), DataError);

  // Speaker s2 keeps a single utterance.
  Dataset tiny = hsaudit::testing::random_dataset(3, 3, 4, 1, 1);
  tiny.records.resize(7);
  CHECK_THROWS_WITH_AS(train_attacker(tiny, {}), doctest::Contains("plda: singleton"), DataError);
}
