// src/core.cc

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

#include "hsaudit/core.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hsaudit/rng.h"

namespace hsaudit {

int mid_layer_index(int n_layers) { return (n_layers + 1) / 2; }

LayerTag LayerTag::early(int n) { return {LayerKind::Early, 1, n}; }
LayerTag LayerTag::mid(int n) { return {LayerKind::Mid, mid_layer_index(n), n}; }
LayerTag LayerTag::late(int n) { return {LayerKind::Late, n, n}; }
LayerTag LayerTag::all(int n) { return {LayerKind::MeanPooledAll, 0, n}; }

LayerTag LayerTag::of_kind(LayerKind kind, int n) {
  switch (kind) {
    case LayerKind::Early: return early(n);
    case LayerKind::Mid: return mid(n);
    case LayerKind::Late: return late(n);
    case LayerKind::MeanPooledAll: return all(n);
  }
  throw DataError("invalid layer kind");
}

bool LayerTag::consistent() const {
  if (n_layers < 1) return false;
  switch (kind) {
    case LayerKind::Early: return index == 1;
    case LayerKind::Mid: return index == mid_layer_index(n_layers);
    case LayerKind::Late: return index == n_layers;
    case LayerKind::MeanPooledAll: return index == 0;
  }
  return false;
}

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Early: return "early";
    case LayerKind::Mid: return "mid";
    case LayerKind::Late: return "late";
    case LayerKind::MeanPooledAll: return "all";
  }
  return "?";
}

std::string LayerTag::label() const { return layer_kind_name(kind); }

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "early") return LayerKind::Early;
  if (name == "mid") return LayerKind::Mid;
  if (name == "late") return LayerKind::Late;
  if (name == "all") return LayerKind::MeanPooledAll;
  throw ConfigError("unknown layer '" + name + "' (expected early|mid|late|all)");
}

std::string anon_condition_name(AnonCondition c) {
  switch (c) {
    case AnonCondition::None: return "none";
    case AnonCondition::W2W: return "w2w";
    case AnonCondition::W2F: return "w2f";
  }
  return "?";
}

AnonCondition parse_anon_condition(const std::string& name) {
  if (name == "none") return AnonCondition::None;
  if (name == "w2w") return AnonCondition::W2W;
  if (name == "w2f") return AnonCondition::W2F;
  throw ConfigError("unknown anonymization '" + name + "' (expected none|w2w|w2f)");
}

void check_score_set(const ScoreSet& s) {
  if (s.mated.empty()) throw DataError("score set has no mated scores");
  if (s.non_mated.empty()) throw DataError("score set has no non-mated scores");
  for (double v : s.mated)
    if (!std::isfinite(v)) throw DataError("non-finite mated score");
  for (double v : s.non_mated)
    if (!std::isfinite(v)) throw DataError("non-finite non-mated score");
}

std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> out;
  // Per layer: seen ids and the dimension of the first record.
  std::map<std::pair<int, int>, std::set<std::string>> ids;
  std::map<std::pair<int, int>, Eigen::Index> dims;

  for (const auto& r : d.records) {
    const auto key = std::make_pair(static_cast<int>(r.layer.kind), r.layer.index);
    const auto& f = r.seq.frames;
    if (r.utterance_id.empty()) out.push_back({r.utterance_id, "empty utterance_id"});
    if (r.speaker_id.empty()) out.push_back({r.utterance_id, "empty speaker_id"});
    if (r.turn_index < 1) out.push_back({r.utterance_id, "turn_index must be >= 1"});
    if (!r.layer.consistent())
      out.push_back({r.utterance_id, "layer tag index inconsistent with kind"});
    if (!(r.seq.frame_rate_hz > 0) || !std::isfinite(r.seq.frame_rate_hz))
      out.push_back({r.utterance_id, "frame_rate_hz must be positive"});
    if (f.rows() < 1 || f.cols() < 1) {
      out.push_back({r.utterance_id, "empty frame sequence"});
    } else {
      if (!f.allFinite()) out.push_back({r.utterance_id, "non-finite frame value"});
      auto [it, inserted] = dims.emplace(key, f.cols());
      if (!inserted && it->second != f.cols())
        out.push_back({r.utterance_id, "dimension " + std::to_string(f.cols()) +
                                           " differs from layer dimension " +
                                           std::to_string(it->second)});
    }
    if (!ids[key].insert(r.utterance_id).second)
      out.push_back({r.utterance_id, "duplicate utterance_id within layer"});
  }
  return out;
}

std::vector<std::string> speakers_of(const Dataset& d) {
  std::set<std::string> s;
  for (const auto& r : d.records) s.insert(r.speaker_id);
  return {s.begin(), s.end()};
}

std::vector<LayerTag> layers_of(const Dataset& d) {
  std::vector<LayerTag> out;
  for (const auto& r : d.records)
    if (std::find(out.begin(), out.end(), r.layer) == out.end()) out.push_back(r.layer);
  return out;
}

Dataset select_layer(const Dataset& d, const LayerTag& layer) {
  Dataset out{{}, d.split, d.provenance, d.anon_condition};
  for (const auto& r : d.records)
    if (r.layer == layer) out.records.push_back(r);
  return out;
}

std::pair<Dataset, Dataset> split_speakers(const Dataset& d, double train_fraction,
                                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  auto speakers = speakers_of(d);
  const std::size_t n = speakers.size();
  if (n < 4) throw DataError("insufficient speakers: need at least 4, have " + std::to_string(n));

  Rng rng(derive_seed(seed, "split_speakers"));
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(speakers[i], speakers[rng.uniform_index(i + 1)]);

  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  const std::set<std::string> train_set(speakers.begin(), speakers.begin() + n_train);

  Dataset train{{}, Split::AttackerTrain, d.provenance, d.anon_condition};
  Dataset rest{{}, Split::Trial, d.provenance, d.anon_condition};
  for (const auto& r : d.records)
    (train_set.count(r.speaker_id) ? train : rest).records.push_back(r);
  return {std::move(train), std::move(rest)};
}

std::pair<Dataset, Dataset> split_enroll_trial(const Dataset& d) {
  Dataset enroll{{}, Split::Enroll, d.provenance, d.anon_condition};
  Dataset test{{}, Split::Trial, d.provenance, d.anon_condition};
  std::map<std::pair<std::string, int>, std::size_t> seen;
  for (const auto& r : d.records) {
    auto& count = seen[{r.speaker_id, static_cast<int>(r.layer.kind)}];
    (count % 2 == 0 ? enroll : test).records.push_back(r);
    ++count;
  }
  return {std::move(enroll), std::move(test)};
}

TrialList make_trials(const Dataset& enroll, const Dataset& test) {
  TrialList out;
  std::size_t mated = 0;
  for (const auto& e : enroll.records) {
    for (const auto& t : test.records) {
      if (e.utterance_id == t.utterance_id) continue;
      const bool is_mated = e.speaker_id == t.speaker_id;
      mated += is_mated;
      out.trials.push_back({e.utterance_id, t.utterance_id, is_mated});
    }
  }
  if (mated == 0 || mated == out.trials.size())
    throw DataError("trial design needs at least one mated and one non-mated trial");
  return out;
}

}  // namespace hsaudit
