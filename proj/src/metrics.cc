// src/metrics.cc

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

#include "hsaudit/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsaudit {

std::vector<DetPoint> compute_det(const ScoreSet& s) {
  check_score_set(s);
  std::vector<double> mated = s.mated;
  std::vector<double> non_mated = s.non_mated;
  std::sort(mated.begin(), mated.end());
  std::sort(non_mated.begin(), non_mated.end());
  const double nm = static_cast<double>(mated.size());
  const double nn = static_cast<double>(non_mated.size());

  std::vector<DetPoint> out;
  out.reserve(mated.size() + non_mated.size());
  // Merge walk: at threshold t, i mated and j non-mated scores lie below t.
  std::size_t i = 0, j = 0;
  while (i < mated.size() || j < non_mated.size()) {
    double t;
    if (j == non_mated.size() || (i < mated.size() && mated[i] <= non_mated[j]))
      t = mated[i];
    else
      t = non_mated[j];
    out.push_back({t, (nn - static_cast<double>(j)) / nn, static_cast<double>(i) / nm});
    while (i < mated.size() && mated[i] == t) ++i;
    while (j < non_mated.size() && non_mated[j] == t) ++j;
  }
  return out;
}

EerResult compute_eer(const ScoreSet& s) {
  auto det = compute_det(s);
  // Past the largest score nothing is accepted.
  det.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});

  EerResult r;
  r.n_mated = s.mated.size();
  r.n_non_mated = s.non_mated.size();
  double raw = 0.5;
  for (std::size_t k = 0; k < det.size(); ++k) {
    const double diff = det[k].far - det[k].frr;
    if (diff == 0.0) {
      raw = det[k].far;
      r.threshold = det[k].threshold;
      break;
    }
    if (diff < 0.0) {
      // k >= 1: the first point has FRR = 0 and FAR = 1.
      const auto& a = det[k - 1];
      const auto& b = det[k];
      const double da = a.far - a.frr;
      const double lambda = da / (da - diff);
      raw = a.far + lambda * (b.far - a.far);
      r.threshold = std::isfinite(b.threshold) ? a.threshold + lambda * (b.threshold - a.threshold)
                                               : a.threshold;
      break;
    }
  }
  r.inverted = raw > 0.5;
  r.eer = r.inverted ? 1.0 - raw : raw;
  return r;
}

LinkabilityResult compute_linkability(const ScoreSet& s, double omega, int n_bins) {
  check_score_set(s);
  if (n_bins < 2) throw ConfigError("linkability needs n_bins >= 2");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be > 0");

  LinkabilityResult r;
  r.omega = omega;
  r.n_bins = n_bins;
  if (s.mated.size() < 10 || s.non_mated.size() < 10)
    r.warnings.push_back("fewer than 10 scores in a class; linkability estimate is unreliable");

  const auto [mn_m, mx_m] = std::minmax_element(s.mated.begin(), s.mated.end());
  const auto [mn_n, mx_n] = std::minmax_element(s.non_mated.begin(), s.non_mated.end());
  const double lo = std::min(*mn_m, *mn_n);
  const double hi = std::max(*mx_m, *mx_n);
  if (!(hi > lo)) {
    r.warnings.push_back("degenerate score range; linkability set to 0");
    r.d_sys = 0.0;
    return r;
  }

  const double width = (hi - lo) / n_bins;
  auto bin_of = [&](double v) {
    const auto b = static_cast<int>(std::floor((v - lo) / width));
    return std::clamp(b, 0, n_bins - 1);
  };
  std::vector<double> cm(n_bins, 0.0), cn(n_bins, 0.0);
  for (double v : s.mated) cm[bin_of(v)] += 1.0;
  for (double v : s.non_mated) cn[bin_of(v)] += 1.0;

  const double zm = static_cast<double>(s.mated.size()) + n_bins;
  const double zn = static_cast<double>(s.non_mated.size()) + n_bins;
  r.per_bin.reserve(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    const double pm = (cm[b] + 1.0) / zm;
    const double pn = (cn[b] + 1.0) / zn;
    const double olr = omega * pm / pn;
    const double local = std::max(0.0, 2.0 * olr / (1.0 + olr) - 1.0);
    r.per_bin.push_back({lo + (b + 0.5) * width, local, pm});
    r.d_sys += pm * local;
  }
  return r;
}

double privacy_score(double linkability) {
  if (!(linkability >= 0.0 && linkability <= 1.0))
    throw DataError("linkability must lie in [0, 1]");
  return 1.0 - linkability;
}

}  // namespace hsaudit
