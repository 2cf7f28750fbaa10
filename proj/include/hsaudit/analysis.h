// include/hsaudit/analysis.h

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

#ifndef HSAUDIT_ANALYSIS_H_
#define HSAUDIT_ANALYSIS_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsaudit/attacker.h"
#include "hsaudit/core.h"
#include "hsaudit/metrics.h"
#include "hsaudit/pipeline.h"

namespace hsaudit {

struct LayerSelection {
  int early = 1;
  int mid = 1;
  int late = 1;
};

/// (1, round(N/2), N) for N >= 2.
LayerSelection layer_select(int n_layers);

/// Element-wise mean over the layer axis.  All sequences must share T and D.
FrameSequence mean_pool_layers(const std::vector<FrameSequence>& per_layer);

struct RunLabels {
  std::string system;
  std::string encoder;
  std::string anon;
};

struct LayerRun {
  RunLabels labels;
  std::map<LayerKind, ScoreSet> scores;  // needs all four layer kinds
};

struct LayerRow {
  RunLabels labels;
  double eer_early = 0.5;
  double eer_mid = 0.5;
  double eer_late = 0.5;
  double eer_all = 0.5;
};

struct LayerTable {
  std::vector<LayerRow> rows;
};

LayerTable build_layer_table(const std::vector<LayerRun>& runs);

enum class TurnMode { Cumulative, PerTurn };

struct TurnPoint {
  int turns = 1;
  double privacy = 1.0;  // 1 - d_sys
  double d_sys = 0.0;
  std::size_t n_mated = 0;
  std::size_t n_non_mated = 0;
};

struct TurnCurve {
  std::string label;
  std::vector<TurnPoint> points;
};

inline const std::vector<int> kDefaultTurnGrid = {1, 3, 5, 7, 10};

/// Per dialogue side, the k-th occurrence of a turn index in a speaker's
/// records (record order) belongs to that speaker's k-th dialogue.
struct DialogueSide {
  std::string speaker_id;
  int dialogue = 0;
  std::map<std::uint32_t, const UtteranceRecord*> turns;
};
std::vector<DialogueSide> dialogue_sides(const Dataset& d);

/// Frames of turns 1..n (cumulative) or turn n alone, in turn order;
/// empty when the dialogue lacks a needed turn.
std::optional<FrameSequence> dialogue_observation(const DialogueSide& side, int n, TurnMode mode);

/// Scores every pair of dialogue-side observations at n turns; pairs of the
/// same speaker are mated.
ScoreSet dialogue_scores(const Attacker& atk, const Dataset& d, int n, TurnMode mode);

/// Privacy (1 - linkability) against the number of dialogue turns.  d must
/// hold a single layer with turn indices up to max(turn_grid).
TurnCurve turnwise_curve(const Attacker& atk, const Dataset& d,
                         const std::vector<int>& turn_grid = kDefaultTurnGrid,
                         const LinkabilityConfig& lnk = {}, TurnMode mode = TurnMode::Cumulative,
                         const std::string& label = "");

struct PrivacyRow {
  RunLabels labels;
  std::string attacker;
  double eer = 0.5;
  double linkability = 0.0;
};

struct EfficiencyRow {
  std::string label;
  EfficiencyReport report;
};

struct Report {
  std::vector<PrivacyRow> privacy;
  std::vector<LayerTable> tables;
  std::vector<TurnCurve> curves;
  std::vector<EfficiencyRow> efficiency;
};

enum class ReportFormat { Csv, Markdown, Json };
ReportFormat parse_report_format(const std::string& name);

/*
  csv: one block per section, blocks separated by a blank line, each
  starting with its header row:
    section,system,encoder,anon,attacker,eer,linkability          (privacy)
    section,system,encoder,anon,eer_early,eer_mid,eer_late,eer_all (layers)
    section,curve,turns,privacy                                  (turns)
    section,condition,rtfx,frl_s,ttsr,int_latency_s,isr          (efficiency)
  EER columns are percentages.  csv and markdown round numbers to three
  significant digits; json keeps full precision and carries
  "schema": "hsaudit.report/1".
*/
std::string emit_report(const Report& report, ReportFormat format);

/// Inverse of the json emitter, so a saved report can be re-rendered.
/// Throws DataError on a malformed document or unknown schema.
Report parse_report_json(std::istream& source);

/// Three significant digits, trailing point removed ("24.6", "0.391", "235").
std::string sig3(double v);

}  // namespace hsaudit

#endif  // HSAUDIT_ANALYSIS_H_
