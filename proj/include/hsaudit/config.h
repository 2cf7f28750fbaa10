// include/hsaudit/config.h

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

#ifndef HSAUDIT_CONFIG_H_
#define HSAUDIT_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsaudit/analysis.h"
#include "hsaudit/attacker.h"
#include "hsaudit/metrics.h"
#include "hsaudit/pipeline.h"
#include "hsaudit/synth.h"
#include "json.hpp"

namespace hsaudit {

/// Where a condition's hidden states come from.  Dump paths are keyed by
/// layer name (early, mid, late, all).
struct InputSpec {
  bool synthetic = true;
  std::map<LayerKind, std::string> train_dumps;
  std::map<LayerKind, std::string> eval_dumps;
  AnonCondition dump_anon = AnonCondition::None;  // anonymization already applied to the dumps

  bool uses_dumps() const { return !eval_dumps.empty(); }
};

/// One system / encoder / anonymization combination to audit.
struct ConditionSpec {
  std::string system = "synthetic";
  std::string encoder = "default";
  std::string preset = "default";
  SynthConfig synth;
  std::optional<AnonConfig> anon;
  InputSpec input;

  AnonCondition anon_condition() const;
  RunLabels labels() const;
};

struct AttackerTrainingSpec {
  AttackerConfig attacker;       // condition is derived per run
  int train_speakers = 256;      // size of the separate synthetic training population
  int train_utts_per_speaker = 20;
};

struct TurnsSpec {
  bool enabled = true;
  std::vector<int> grid = kDefaultTurnGrid;
  TurnMode mode = TurnMode::Cumulative;
  int utts_per_speaker = 40;  // synthetic dialogues: utts_per_speaker / max_turns per speaker
};

struct PipelineSpec {
  std::string cost_model;  // empty: built-in illustrative model
  std::string trace;       // empty: generated from trace_shape
  TraceShape trace_shape;
  ResponseDelayModel delay;
  SessionOptions session;
  double rtfx_cap = 1e6;   // reported in place of an unbounded RTFx
};

/*
  Run configuration, read from JSON.  Every key is optional; unknown keys
  are errors naming their path.  Top-level keys:

    output_dir   string   (default: $HSAUDIT_OUT, else "hsaudit-out")
    seed         integer  master seed for attacker populations and anonymizers
    system, encoder       labels of the top-level condition
    synth        { preset, n_speakers, utts_per_speaker, frames_per_turn, dim,
                   n_layers, speaker_scale (list or number), channel_scale,
                   noise_scale, seed, max_turns, frame_rate_hz,
                   speaker_prefix, layers }
    anon         null | { residual_leak, pseudo_policy, mode }
    input        { synthetic, anon, train_dumps {layer: path}, eval_dumps {layer: path} }
    attacker     { lda_dim, ridge, em_iters, train_speakers, train_utts_per_speaker }
    metrics      { omega, n_bins }
    turns        { enabled, grid, mode, utts_per_speaker }
    pipeline     { cost_model, trace, trace_shape {turns, turn_s, gap_s,
                   interrupts, frame_ms}, response_delay {mean_ms, jitter_ms,
                   seed}, turn_window_s, interrupt_window_s, rtfx_cap }
    report       { formats: ["csv", "markdown", "json"], name }
    conditions   "reference-sweep" | list of objects holding any of
                 system, encoder, synth, anon, input

  Each condition is the top-level condition keys merge-patched with the
  list entry, so {"anon": null} inside an entry drops an inherited
  anonymizer.  Without `conditions` the top-level keys form the only
  condition.
*/
struct RunConfig {
  std::string output_dir;
  std::uint64_t seed = 1;
  ConditionSpec base;
  AttackerTrainingSpec training;
  LinkabilityConfig metrics;
  TurnsSpec turns;
  PipelineSpec pipeline;
  std::vector<ReportFormat> formats = {ReportFormat::Csv, ReportFormat::Markdown,
                                       ReportFormat::Json};
  std::string report_name = "report";
  std::vector<ConditionSpec> conditions;  // never empty after parsing
};

/// Parses and validates; throws ConfigError with the offending key path.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

/// Sets `key.path` in doc to value, parsed as JSON when possible and kept as
/// a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// The calibrated six-condition sweep used by "conditions": "reference-sweep".
nlohmann::json reference_sweep();

/// Default output directory: $HSAUDIT_OUT when set, else "hsaudit-out".
std::string default_output_dir();

}  // namespace hsaudit

#endif  // HSAUDIT_CONFIG_H_
