// include/hsaudit/core.h

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

#ifndef HSAUDIT_CORE_H_
#define HSAUDIT_CORE_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hsaudit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base of every error thrown by the toolkit.  Subclasses let the command
/// line map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (unknown key, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates a contract (bad file, unknown id, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a fit (singular covariance, non-PD matrix).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Hidden states of one utterance at one layer: T rows (frames) by D columns.
struct FrameSequence {
  Matrix frames;
  double frame_rate_hz = 12.5;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

enum class LayerKind : std::uint8_t { Early = 0, Mid = 1, Late = 2, MeanPooledAll = 3 };

/// Which layer (or layer average) of an N-layer backbone a record came from.
/// index is 0 for MeanPooledAll.
struct LayerTag {
  LayerKind kind = LayerKind::Early;
  int index = 1;
  int n_layers = 1;

  static LayerTag early(int n_layers);
  static LayerTag mid(int n_layers);
  static LayerTag late(int n_layers);
  static LayerTag all(int n_layers);
  static LayerTag of_kind(LayerKind kind, int n_layers);

  /// True when index agrees with kind and n_layers.
  bool consistent() const;
  /// "early", "mid", "late" or "all".
  std::string label() const;

  friend bool operator==(const LayerTag&, const LayerTag&) = default;
};

/// round(N/2) with halves rounded up.
int mid_layer_index(int n_layers);
LayerKind parse_layer_kind(const std::string& name);
std::string layer_kind_name(LayerKind kind);

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::uint32_t turn_index = 1;
  LayerTag layer;
  FrameSequence seq;
};

enum class Split { AttackerTrain, Enroll, Trial };
enum class Provenance { Synthetic, Extracted };
enum class AnonCondition { None, W2W, W2F };

std::string anon_condition_name(AnonCondition c);
AnonCondition parse_anon_condition(const std::string& name);

struct Dataset {
  std::vector<UtteranceRecord> records;
  Split split = Split::AttackerTrain;
  Provenance provenance = Provenance::Synthetic;
  AnonCondition anon_condition = AnonCondition::None;
};

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool is_mated = false;
};

struct TrialList {
  std::vector<Trial> trials;
};

/// Mated and non-mated verification scores.  Higher means "same speaker".
struct ScoreSet {
  std::vector<double> mated;
  std::vector<double> non_mated;
};

/// Throws DataError if either list is empty or holds a non-finite value.
void check_score_set(const ScoreSet& s);

struct Violation {
  std::string utterance_id;
  std::string message;
};

/// Every invariant violation in d.  Never throws.
std::vector<Violation> validate_dataset(const Dataset& d);

/// Speaker-disjoint split.  The first dataset holds round(train_fraction *
/// n_speakers) speakers (clamped to [1, n-1]) and is tagged AttackerTrain;
/// the second is tagged Trial.  Requires at least 4 speakers.
std::pair<Dataset, Dataset> split_speakers(const Dataset& d, double train_fraction,
                                           std::uint64_t seed);

/// Sorted distinct speaker ids.
std::vector<std::string> speakers_of(const Dataset& d);

/// Distinct layer tags in order of first appearance.
std::vector<LayerTag> layers_of(const Dataset& d);

/// Records of one layer, keeping the dataset metadata.
Dataset select_layer(const Dataset& d, const LayerTag& layer);

/// Alternates each speaker's utterances (in record order) between an Enroll
/// and a Trial dataset: even positions enroll, odd positions test.
std::pair<Dataset, Dataset> split_enroll_trial(const Dataset& d);

/// Every enroll x test pair except self-trials.  Throws DataError if the
/// result lacks a mated or a non-mated trial.
TrialList make_trials(const Dataset& enroll, const Dataset& test);

}  // namespace hsaudit

#endif  // HSAUDIT_CORE_H_
