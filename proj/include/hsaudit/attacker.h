// include/hsaudit/attacker.h

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

#ifndef HSAUDIT_ATTACKER_H_
#define HSAUDIT_ATTACKER_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hsaudit/core.h"

namespace hsaudit {

// The verification attacker is a chain
//   frames -> stats pooling -> whitening -> LDA -> two-covariance PLDA,
// trained on speaker-labelled utterances and scoring trials by
// log-likelihood ratio.  Embedding matrices hold one embedding per row.

/// Frame mean followed by population standard deviation, length 2D.
struct PooledEmbedding {
  Vector vector;
};

PooledEmbedding pool_stats(const FrameSequence& seq);

struct Whitener {
  Vector mean;
  Matrix transform;  // (Sigma + ridge I)^(-1/2), symmetric

  Vector apply(const Vector& x) const { return transform * (x - mean); }
  Matrix apply_rows(const Matrix& x) const;
};

/// Sample mean and (Sigma + ridge I)^(-1/2), Sigma the unbiased sample
/// covariance.  With ridge = 0 a singular Sigma is an error.
Whitener fit_whitener(const Matrix& embs, double ridge);

struct LdaProjection {
  Matrix basis;  // M x K

  Eigen::Index dim() const { return basis.cols(); }
  Vector apply(const Vector& x) const { return basis.transpose() * x; }
  Matrix apply_rows(const Matrix& x) const { return x * basis; }
};

/// Class scatter matrices normalised by the number of samples.
struct ScatterStats {
  Matrix within;
  Matrix between;
  int n_classes = 0;
};
ScatterStats scatter_stats(const Matrix& embs, std::span<const int> labels);

/// Top-k solutions of S_b v = lambda S_w v, scaled so basis^T S_w basis = I;
/// each column's largest-magnitude entry is positive.
LdaProjection fit_lda(const Matrix& embs, std::span<const int> labels, int k);

struct PldaModel {
  Vector mu;
  Matrix between_cov;  // B, PSD
  Matrix within_cov;   // W, PD
  std::vector<double> em_loglik_trace;

  Eigen::Index dim() const { return mu.size(); }
};

/// Two-covariance PLDA fit by EM: y ~ N(mu, B) per class, x ~ N(y, W) per
/// observation.  Initialised at mu = global mean, B = W = Sigma_total / 2.
/// em_loglik_trace[i] is the marginal data log-likelihood after iteration i.
PldaModel fit_plda(const Matrix& embs, std::span<const int> labels, int iters);

/// Marginal log-likelihood of labelled data under a PLDA model.
double plda_loglik(const PldaModel& model, const Matrix& embs, std::span<const int> labels);

/// Precomputed quadratic form of the verification LLR:
///   llr(x, y) = 1/2 x'Qx + 1/2 y'Qy + x'Py + c   (x, y centred by mu)
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);

  double score(const Vector& e1, const Vector& e2) const;

  // Batch scoring: prepare() each embedding once, then combine pairs.
  struct Prepared {
    Vector centered;
    Vector p_times;  // P x
    double self_term = 0.0;  // 1/2 x'Qx
  };
  Prepared prepare(const Vector& e) const;
  double score(const Prepared& a, const Prepared& b) const;

 private:
  Vector mu_;
  Matrix q_;
  Matrix p_;
  double constant_ = 0.0;
};

/// log p(e1, e2 | same) - log p(e1, e2 | different).  Symmetric in e1, e2.
double score_trial(const PldaModel& model, const Vector& e1, const Vector& e2);

enum class TrainingCondition { OnClean, LazyInformed };

std::string training_condition_name(TrainingCondition c);
TrainingCondition parse_training_condition(const std::string& name);

struct AttackerConfig {
  int lda_dim = 0;  // 0: min(100, classes - 1, M)
  double ridge = 1e-6;
  int em_iters = 20;
  TrainingCondition condition = TrainingCondition::OnClean;
};

struct Attacker {
  Whitener whitener;
  LdaProjection lda;
  PldaModel plda;
  TrainingCondition training_condition = TrainingCondition::OnClean;

  /// Pooling, whitening and LDA for one utterance.
  Vector embed(const FrameSequence& seq) const;
};

/// Fits pooling -> whitening -> LDA -> PLDA on a single-layer training set.
/// Component errors are rethrown prefixed with the failing stage.
Attacker train_attacker(const Dataset& train, const AttackerConfig& cfg);

/// Scores every trial; ids resolve against enroll (first field) and test
/// (second field).
ScoreSet score_trials(const Attacker& atk, const Dataset& enroll, const Dataset& test,
                      const TrialList& trials);

void save_attacker(const Attacker& atk, std::ostream& sink);
Attacker load_attacker(std::istream& source);

}  // namespace hsaudit

#endif  // HSAUDIT_ATTACKER_H_
