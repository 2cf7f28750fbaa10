// src/attacker.cc

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

#include "hsaudit/attacker.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include "json.hpp"

namespace hsaudit {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Eigenvalues at or below this fraction of the largest count as zero.
constexpr double kSingularTol = 1e-12;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_positive_definite(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev.size() > 0 && ev.minCoeff() > kSingularTol * std::max(1.0, ev.maxCoeff());
}

// Labels compacted to 0..C-1 in order of first appearance.
std::vector<int> compact_labels(std::span<const int> labels, int* n_classes) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  *n_classes = static_cast<int>(remap.size());
  return out;
}

struct ClassStats {
  std::vector<int> counts;
  Matrix means;         // C x K
  Matrix within_scatter;  // sum over classes of sum (x - mean_c)(x - mean_c)'
  Vector global_mean;
  Matrix total_cov;     // normalised by N
};

ClassStats class_stats(const Matrix& embs, std::span<const int> labels) {
  if (static_cast<std::size_t>(embs.rows()) != labels.size())
    throw DataError("embedding count does not match label count");
  int n_classes = 0;
  const auto lab = compact_labels(labels, &n_classes);
  const auto k = embs.cols();
  ClassStats st;
  st.counts.assign(n_classes, 0);
  st.means = Matrix::Zero(n_classes, k);
  for (Eigen::Index i = 0; i < embs.rows(); ++i) {
    st.means.row(lab[i]) += embs.row(i);
    ++st.counts[lab[i]];
  }
  for (int c = 0; c < n_classes; ++c) st.means.row(c) /= st.counts[c];
  Matrix centered = embs;
  for (Eigen::Index i = 0; i < embs.rows(); ++i) centered.row(i) -= st.means.row(lab[i]);
  st.within_scatter = centered.transpose() * centered;
  st.global_mean = embs.colwise().mean().transpose();
  const Matrix total = embs.rowwise() - st.global_mean.transpose();
  st.total_cov = total.transpose() * total / static_cast<double>(embs.rows());
  return st;
}

template <typename F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

PooledEmbedding pool_stats(const FrameSequence& seq) {
  const auto& f = seq.frames;
  if (f.rows() < 1 || f.cols() < 1) throw DataError("cannot pool an empty frame sequence");
  const Eigen::Index d = f.cols();
  const double t = static_cast<double>(f.rows());
  PooledEmbedding out;
  out.vector.resize(2 * d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const double mean = f.col(c).sum() / t;
    const double var = (f.col(c).array() - mean).square().sum() / t;
    out.vector[c] = mean;
    out.vector[d + c] = std::sqrt(var);
  }
  return out;
}

Matrix Whitener::apply_rows(const Matrix& x) const {
  return (x.rowwise() - mean.transpose()) * transform;  // transform is symmetric
}

Whitener fit_whitener(const Matrix& embs, double ridge) {
  if (embs.rows() < 2) throw DataError("whitening needs at least 2 embeddings");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge must be >= 0");
  Whitener w;
  w.mean = embs.colwise().mean().transpose();
  const Matrix centered = embs.rowwise() - w.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(embs.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov));
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  if (ridge == 0.0 && (ev.maxCoeff() <= 0.0 || ev.minCoeff() <= kSingularTol * ev.maxCoeff()))
    throw NumericError("covariance is singular; use ridge > 0");
  const Vector scale = (ev.array() + ridge).rsqrt();
  w.transform = symmetrized(es.eigenvectors() * scale.asDiagonal() *
                            es.eigenvectors().transpose());
  return w;
}

ScatterStats scatter_stats(const Matrix& embs, std::span<const int> labels) {
  const ClassStats st = class_stats(embs, labels);
  const double n = static_cast<double>(embs.rows());
  ScatterStats out;
  out.n_classes = static_cast<int>(st.counts.size());
  out.within = symmetrized(st.within_scatter / n);
  out.between = Matrix::Zero(embs.cols(), embs.cols());
  for (int c = 0; c < out.n_classes; ++c) {
    const Vector d = st.means.row(c).transpose() - st.global_mean;
    out.between += st.counts[c] * d * d.transpose();
  }
  out.between = symmetrized(out.between / n);
  return out;
}

LdaProjection fit_lda(const Matrix& embs, std::span<const int> labels, int k) {
  const ScatterStats sc = scatter_stats(embs, labels);
  if (sc.n_classes < 2) throw DataError("LDA needs at least 2 classes");
  const int limit = static_cast<int>(std::min<Eigen::Index>(embs.cols(), sc.n_classes - 1));
  if (k < 1 || k > limit)
    throw ConfigError("LDA dimension " + std::to_string(k) + " must lie in [1, " +
                      std::to_string(limit) + "]");
  if (!is_positive_definite(sc.within))
    throw NumericError("within-class scatter is singular; whiten with ridge > 0 first");

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(sc.between, sc.within,
                                                       Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw NumericError("LDA eigenproblem failed");
  const Eigen::Index m = embs.cols();
  LdaProjection lda;
  lda.basis.resize(m, k);
  for (int j = 0; j < k; ++j) {
    Vector v = ges.eigenvectors().col(m - 1 - j);  // eigenvalues ascend
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    lda.basis.col(j) = v;
  }
  return lda;
}

double plda_loglik(const PldaModel& model, const Matrix& embs, std::span<const int> labels) {
  const ClassStats st = class_stats(embs, labels);
  const auto k = static_cast<double>(model.dim());
  const double n_total = static_cast<double>(embs.rows());
  const double n_classes = static_cast<double>(st.counts.size());

  Eigen::LLT<Matrix> w_llt(model.within_cov);
  if (w_llt.info() != Eigen::Success) throw NumericError("W is not positive definite");
  const double logdet_w = 2.0 * w_llt.matrixLLT().diagonal().array().log().sum();
  const double trace_term = w_llt.solve(st.within_scatter).trace();

  double ll = -0.5 * (n_total * k * kLog2Pi + (n_total - n_classes) * logdet_w + trace_term);
  std::map<int, Eigen::LLT<Matrix>> by_count;
  for (std::size_t c = 0; c < st.counts.size(); ++c) {
    const int n = st.counts[c];
    auto it = by_count.find(n);
    if (it == by_count.end())
      it = by_count.emplace(n, Eigen::LLT<Matrix>(n * model.between_cov + model.within_cov)).first;
    const auto& llt = it->second;
    const Vector d = st.means.row(c).transpose() - model.mu;
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    ll -= 0.5 * (logdet + n * d.dot(llt.solve(d)));
  }
  return ll;
}

PldaModel fit_plda(const Matrix& embs, std::span<const int> labels, int iters) {
  if (iters < 1) throw ConfigError("EM iterations must be >= 1");
  const ClassStats st = class_stats(embs, labels);
  const int n_classes = static_cast<int>(st.counts.size());
  if (n_classes < 2) throw DataError("PLDA needs at least 2 classes");
  for (int c = 0; c < n_classes; ++c)
    if (st.counts[c] < 2) throw DataError("singleton class: every class needs >= 2 embeddings");

  const Eigen::Index k = embs.cols();
  const double n_total = static_cast<double>(embs.rows());

  PldaModel model;
  model.mu = st.global_mean;
  model.between_cov = 0.5 * st.total_cov;
  model.within_cov = 0.5 * st.total_cov;
  if (!is_positive_definite(model.within_cov))
    throw NumericError("degenerate covariance: total covariance is not positive definite");

  for (int it = 0; it < iters; ++it) {
    // E-step.  Posterior of the class mean given n observations with mean
    // xbar: N(mu + G (xbar - mu), B - G B) with G = B (B + W/n)^-1.
    std::map<int, std::pair<Matrix, Matrix>> gain_cov;  // n -> (G, C)
    for (int n : st.counts) {
      if (gain_cov.count(n)) continue;
      const Matrix a = model.between_cov + model.within_cov / n;
      Eigen::LLT<Matrix> llt(a);
      if (llt.info() != Eigen::Success)
        throw NumericError("B + W/n not positive definite at EM iteration " +
                           std::to_string(it + 1));
      const Matrix g = llt.solve(model.between_cov).transpose();
      const Matrix c = symmetrized(model.between_cov - g * model.between_cov);
      gain_cov.emplace(n, std::make_pair(g, c));
    }
    Matrix post_means(n_classes, k);
    for (int c = 0; c < n_classes; ++c) {
      const auto& g = gain_cov.at(st.counts[c]).first;
      post_means.row(c) =
          (model.mu + g * (st.means.row(c).transpose() - model.mu)).transpose();
    }

    // M-step.
    const Vector mu = post_means.colwise().mean().transpose();
    Matrix b = Matrix::Zero(k, k);
    Matrix w = st.within_scatter;
    for (int c = 0; c < n_classes; ++c) {
      const int n = st.counts[c];
      const auto& cov = gain_cov.at(n).second;
      const Vector dm = post_means.row(c).transpose() - mu;
      const Vector dx = st.means.row(c).transpose() - post_means.row(c).transpose();
      b += cov + dm * dm.transpose();
      w += n * (dx * dx.transpose() + cov);
    }
    model.mu = mu;
    model.between_cov = symmetrized(b / n_classes);
    model.within_cov = symmetrized(w / n_total);
    if (!is_positive_definite(model.within_cov))
      throw NumericError("within-class covariance not positive definite at EM iteration " +
                         std::to_string(it + 1));
    model.em_loglik_trace.push_back(plda_loglik(model, embs, labels));
  }
  return model;
}

PldaScorer::PldaScorer(const PldaModel& model) : mu_(model.mu) {
  const Matrix& b = model.between_cov;
  const Matrix t = symmetrized(b + model.within_cov);
  Eigen::LLT<Matrix> t_llt(t);
  if (t_llt.info() != Eigen::Success) throw NumericError("B + W is not positive definite");
  const Eigen::Index k = t.rows();
  const Matrix t_inv = symmetrized(t_llt.solve(Matrix::Identity(k, k)));
  // Schur complement of the same-speaker joint covariance [[T, B], [B, T]].
  const Matrix s = symmetrized(t - b * t_inv * b);
  Eigen::LLT<Matrix> s_llt(s);
  if (s_llt.info() != Eigen::Success) throw NumericError("PLDA Schur complement not PD");
  const Matrix s_inv = symmetrized(s_llt.solve(Matrix::Identity(k, k)));
  q_ = t_inv - s_inv;
  p_ = symmetrized(t_inv * b * s_inv);
  const double logdet_t = 2.0 * t_llt.matrixLLT().diagonal().array().log().sum();
  const double logdet_s = 2.0 * s_llt.matrixLLT().diagonal().array().log().sum();
  constant_ = 0.5 * (logdet_t - logdet_s);
}

PldaScorer::Prepared PldaScorer::prepare(const Vector& e) const {
  if (e.size() != mu_.size())
    throw DataError("embedding dimension " + std::to_string(e.size()) + " does not match model " +
                    std::to_string(mu_.size()));
  Prepared p;
  p.centered = e - mu_;
  p.p_times = p_ * p.centered;
  p.self_term = 0.5 * p.centered.dot(q_ * p.centered);
  return p;
}

double PldaScorer::score(const Prepared& a, const Prepared& b) const {
  // Each term is formed symmetrically so score(a, b) == score(b, a) exactly.
  const double cross = 0.5 * (a.centered.dot(b.p_times) + b.centered.dot(a.p_times));
  return (a.self_term + b.self_term) + cross + constant_;
}

double PldaScorer::score(const Vector& e1, const Vector& e2) const {
  return score(prepare(e1), prepare(e2));
}

double score_trial(const PldaModel& model, const Vector& e1, const Vector& e2) {
  if (e1.size() != model.dim() || e2.size() != model.dim())
    throw DataError("trial vectors must have the model dimension " +
                    std::to_string(model.dim()));
  return PldaScorer(model).score(e1, e2);
}

std::string training_condition_name(TrainingCondition c) {
  return c == TrainingCondition::OnClean ? "on-clean" : "lazy-informed";
}

TrainingCondition parse_training_condition(const std::string& name) {
  if (name == "on-clean") return TrainingCondition::OnClean;
  if (name == "lazy-informed") return TrainingCondition::LazyInformed;
  throw ConfigError("unknown attacker condition '" + name +
                    "' (expected on-clean|lazy-informed)");
}

Vector Attacker::embed(const FrameSequence& seq) const {
  return lda.apply(whitener.apply(pool_stats(seq).vector));
}

Attacker train_attacker(const Dataset& train, const AttackerConfig& cfg) {
  if (train.split != Split::AttackerTrain)
    throw DataError("attacker training data must have split AttackerTrain");
  if (cfg.condition == TrainingCondition::LazyInformed &&
      train.anon_condition == AnonCondition::None)
    throw ConfigError("lazy-informed attacker requires anonymized training data");
  if (train.records.empty()) throw DataError("empty training set");
  if (layers_of(train).size() != 1) throw DataError("training set mixes layers");

  std::map<std::string, int> speaker_ids;
  std::vector<int> labels;
  Matrix pooled(static_cast<Eigen::Index>(train.records.size()),
                2 * train.records.front().seq.dim());
  with_stage("pooling", [&] {
    for (std::size_t i = 0; i < train.records.size(); ++i) {
      const auto& r = train.records[i];
      if (r.seq.dim() * 2 != pooled.cols()) throw DataError("non-uniform dimension");
      pooled.row(static_cast<Eigen::Index>(i)) = pool_stats(r.seq).vector.transpose();
      auto [it, inserted] = speaker_ids.emplace(r.speaker_id, static_cast<int>(speaker_ids.size()));
      labels.push_back(it->second);
    }
    return 0;
  });

  Attacker atk;
  atk.training_condition = cfg.condition;
  atk.whitener = with_stage("whitening", [&] { return fit_whitener(pooled, cfg.ridge); });
  const Matrix white = atk.whitener.apply_rows(pooled);

  const int n_classes = static_cast<int>(speaker_ids.size());
  int k = cfg.lda_dim;
  if (k == 0) k = static_cast<int>(std::min<Eigen::Index>({100, n_classes - 1, white.cols()}));
  atk.lda = with_stage("lda", [&] { return fit_lda(white, labels, k); });
  const Matrix projected = atk.lda.apply_rows(white);
  atk.plda = with_stage("plda", [&] { return fit_plda(projected, labels, cfg.em_iters); });
  return atk;
}

ScoreSet score_trials(const Attacker& atk, const Dataset& enroll, const Dataset& test,
                      const TrialList& trials) {
  const PldaScorer scorer(atk.plda);
  auto index = [](const Dataset& d) {
    std::unordered_map<std::string, const UtteranceRecord*> m;
    for (const auto& r : d.records) m.emplace(r.utterance_id, &r);
    return m;
  };
  const auto enroll_idx = index(enroll);
  const auto test_idx = index(test);
  std::unordered_map<std::string, PldaScorer::Prepared> enroll_cache, test_cache;
  auto prepared = [&](const std::string& id, const auto& idx, auto& cache,
                      const char* side) -> const PldaScorer::Prepared& {
    if (auto it = cache.find(id); it != cache.end()) return it->second;
    auto rec = idx.find(id);
    if (rec == idx.end())
      throw DataError("unknown " + std::string(side) + " utterance id '" + id + "'");
    return cache.emplace(id, scorer.prepare(atk.embed(rec->second->seq))).first->second;
  };

  ScoreSet out;
  for (const auto& t : trials.trials) {
    const auto& a = prepared(t.enroll_id, enroll_idx, enroll_cache, "enroll");
    const auto& b = prepared(t.test_id, test_idx, test_cache, "test");
    (t.is_mated ? out.mated : out.non_mated).push_back(scorer.score(a, b));
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix json_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw DataError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_attacker(const Attacker& atk, std::ostream& sink) {
  nlohmann::json j;
  j["format"] = "hsaudit.attacker/1";
  j["condition"] = training_condition_name(atk.training_condition);
  j["whitener"] = {{"mean", vector_json(atk.whitener.mean)},
                   {"transform", matrix_json(atk.whitener.transform)}};
  j["lda"] = {{"basis", matrix_json(atk.lda.basis)}};
  j["plda"] = {{"mu", vector_json(atk.plda.mu)},
               {"between", matrix_json(atk.plda.between_cov)},
               {"within", matrix_json(atk.plda.within_cov)},
               {"em_loglik_trace", atk.plda.em_loglik_trace}};
  sink << j.dump(1) << '\n';
}

Attacker load_attacker(std::istream& source) {
  try {
    const auto j = nlohmann::json::parse(source);
    if (j.at("format") != "hsaudit.attacker/1") throw DataError("unknown attacker format");
    Attacker atk;
    atk.training_condition = parse_training_condition(j.at("condition"));
    atk.whitener.mean = json_vector(j.at("whitener").at("mean"));
    atk.whitener.transform = json_matrix(j.at("whitener").at("transform"));
    atk.lda.basis = json_matrix(j.at("lda").at("basis"));
    atk.plda.mu = json_vector(j.at("plda").at("mu"));
    atk.plda.between_cov = json_matrix(j.at("plda").at("between"));
    atk.plda.within_cov = json_matrix(j.at("plda").at("within"));
    atk.plda.em_loglik_trace = j.at("plda").at("em_loglik_trace").get<std::vector<double>>();
    const auto m = atk.whitener.mean.size();
    const auto k = atk.plda.mu.size();
    if (atk.whitener.transform.rows() != m || atk.whitener.transform.cols() != m ||
        atk.lda.basis.rows() != m || atk.lda.basis.cols() != k ||
        atk.plda.between_cov.rows() != k || atk.plda.within_cov.rows() != k)
      throw DataError("attacker component dimensions do not chain");
    return atk;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed attacker file: ") + e.what());
  }
}

}  // namespace hsaudit
