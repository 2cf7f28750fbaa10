// include/hsaudit/workflow.h

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

#ifndef HSAUDIT_WORKFLOW_H_
#define HSAUDIT_WORKFLOW_H_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsaudit/analysis.h"
#include "hsaudit/config.h"

namespace hsaudit {

using ProgressSink = std::function<void(const std::string&)>;

/// Synthetic configs of a condition's evaluation and attacker-training
/// populations.  Training speakers are disjoint from evaluation speakers
/// (different id prefix and seed).
SynthConfig eval_synth_config(const ConditionSpec& c);
SynthConfig training_synth_config(const RunConfig& cfg, const ConditionSpec& c);

/// Seed of the anonymization operator; shared by training and evaluation
/// data so both see the same re-encoding rotation.
std::uint64_t anonymizer_seed(const RunConfig& cfg);

struct ConditionData {
  std::map<LayerKind, Dataset> train;  // AttackerTrain, possibly anonymized
  std::map<LayerKind, Dataset> eval;   // Trial, possibly anonymized
  LayerKind pooled = LayerKind::MeanPooledAll;  // privacy row and turn curve layer
  std::optional<Dataset> dialogues;    // sessions for the turn curve, pooled layer only
};

/// Generates or loads the data of one condition.  Throws DataError
/// "no input data" when the condition has neither dumps nor synthesis.
/// `pooled_only` restricts the data to the pooled layer.
ConditionData load_condition_data(const RunConfig& cfg, const ConditionSpec& c,
                                  bool with_dialogues, bool pooled_only = false);

/// Reads a dump into a validated dataset; throws DataError on violations.
Dataset load_dump_dataset(const std::string& path, Split split, AnonCondition anon);

struct ConditionOutcome {
  RunLabels labels;
  std::string attacker;  // training condition name
  std::map<LayerKind, ScoreSet> scores;
  std::map<LayerKind, EerResult> eer;
  LayerKind pooled = LayerKind::MeanPooledAll;  // layer of the privacy row and turn curve
  LinkabilityResult linkability;
  std::optional<TurnCurve> curve;
};

struct AuditOptions {
  bool all_layers = true;   // false: only the pooled layer
  bool turns = true;
  bool efficiency = true;
};

struct AuditResult {
  std::vector<ConditionOutcome> conditions;
  Report report;
  std::vector<std::string> warnings;
};

/// train -> score -> EER + linkability -> layer table + turn curve ->
/// efficiency, for every configured condition.  Errors carry the stage
/// name and keep their type.
AuditResult run_audit(const RunConfig& cfg, const AuditOptions& opts = {},
                      const ProgressSink& progress = nullptr);

/// None, W2W and W2F sessions on the configured cost model and trace.  An
/// unbounded RTFx is replaced by pipeline.rtfx_cap with a warning.
std::vector<EfficiencyRow> run_pipeline(const PipelineSpec& spec);

/// Writes <name>.csv / .md / .json per configured format, plus
/// <name>_turns.csv when the report holds turn curves.  Returns the paths.
std::vector<std::string> write_reports(const Report& report, const RunConfig& cfg);

/// Creates the directory if needed; throws DataError when it is unusable.
void ensure_output_dir(const std::string& dir);

/// "curve,turns,privacy" rows for external plotting.
std::string turn_plot_csv(const Report& report);

}  // namespace hsaudit

#endif  // HSAUDIT_WORKFLOW_H_
