// include/hsaudit/metrics.h

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

#ifndef HSAUDIT_METRICS_H_
#define HSAUDIT_METRICS_H_

#include <string>
#include <vector>

#include "hsaudit/core.h"

namespace hsaudit {

struct EerResult {
  double eer = 0.5;        // in [0, 0.5]
  double threshold = 0.0;
  std::size_t n_mated = 0;
  std::size_t n_non_mated = 0;
  /// True when the raw crossing exceeded 0.5, i.e. the scores separate the
  /// classes in the opposite direction to the toolkit convention.
  bool inverted = false;
};

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;  // fraction of non-mated scores >= threshold
  double frr = 0.0;  // fraction of mated scores < threshold
};

/// One point per distinct score, thresholds ascending.
std::vector<DetPoint> compute_det(const ScoreSet& s);

/// Equal error rate.  FAR and FRR are step functions over the distinct
/// scores; where they cross between two thresholds the rate is linearly
/// interpolated, an exact tie returns the tied value.  A raw value above 0.5
/// is reported as 1 - eer with `inverted` set.  O(N log N).
EerResult compute_eer(const ScoreSet& s);

struct LinkabilityBin {
  double center = 0.0;
  double local = 0.0;        // D(s) in [0, 1]
  double mated_mass = 0.0;   // smoothed p(s | mated) mass of the bin
};

struct LinkabilityResult {
  double d_sys = 0.0;
  std::vector<LinkabilityBin> per_bin;
  double omega = 1.0;
  int n_bins = 30;
  std::vector<std::string> warnings;
};

struct LinkabilityConfig {
  double omega = 1.0;
  int n_bins = 30;
};

/// Score-based global linkability.  Both score lists are histogrammed on
/// n_bins equal-width bins over [min, max] of their union with add-one
/// smoothing; per bin LR = p(s|mated) / p(s|non-mated) and
///   D(s) = max(0, 2 omega LR / (1 + omega LR) - 1),
///   d_sys = sum over bins of p(s|mated) D(s).
LinkabilityResult compute_linkability(const ScoreSet& s, double omega = 1.0, int n_bins = 30);
inline LinkabilityResult compute_linkability(const ScoreSet& s, const LinkabilityConfig& cfg) {
  return compute_linkability(s, cfg.omega, cfg.n_bins);
}

/// 1 - linkability.
double privacy_score(double linkability);

}  // namespace hsaudit

#endif  // HSAUDIT_METRICS_H_
