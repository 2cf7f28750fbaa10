// include/hsaudit/pipeline.h

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

#ifndef HSAUDIT_PIPELINE_H_
#define HSAUDIT_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hsaudit/core.h"

namespace hsaudit {

struct Stage {
  std::string name;
  double per_frame_cost_ms = 0.0;
  double algorithmic_latency_ms = 0.0;
};

struct StageCost {
  double per_frame_cost_ms = 0.0;
  double algorithmic_latency_ms = 0.0;
};

using CostModel = std::map<std::string, StageCost>;

struct StageGraph {
  std::vector<Stage> stages;
  AnonCondition condition = AnonCondition::None;

  double per_frame_cost_ms() const;
  double latency_ms() const;
};

/// Stage names making up each condition:
///   None: encoder, llm_step, decoder
///   W2W:  anonymizer, synthesis, encoder (re-encoding), llm_step, decoder
///   W2F:  anonymizer-feature, llm_step, decoder
std::vector<std::string> topology_stage_names(AnonCondition condition);

StageGraph build_topology(AnonCondition condition, const CostModel& costs);

/// "<stage> <per_frame_ms> <latency_ms>" per line, '#' comments allowed.
CostModel parse_cost_model(std::istream& text);
void write_cost_model(const CostModel& costs, std::ostream& sink);

/// Illustrative per-stage timings for an 80 ms frame model; not measured.
CostModel default_cost_model();

enum class EventKind { UserSpeechFrame, UserTurnEnd, UserInterruptStart };

std::string event_kind_name(EventKind k);

struct TraceEvent {
  double t_ms = 0.0;
  EventKind kind = EventKind::UserSpeechFrame;
};

/// User-stream events of one session.  Speech frames are the user audio
/// stream (speech or silence) and arrive every frame_ms.
struct DialogueTrace {
  std::vector<TraceEvent> events;
  double frame_ms = 80.0;
};

/// Throws DataError unless timestamps strictly increase and consecutive
/// speech frames are a whole number of frame periods apart.
void validate_trace(const DialogueTrace& trace);

/// "<t_ms> <event_kind>" per line with kinds UserSpeechFrame, UserTurnEnd,
/// UserInterruptStart.
DialogueTrace parse_trace(std::istream& text, double frame_ms);
void write_trace(const DialogueTrace& trace, std::ostream& sink);

struct TraceShape {
  int turns = 10;
  double turn_s = 4.0;     // user speech per turn
  double gap_s = 3.0;      // listening time after each turn end
  int interrupts = 5;      // barge-ins, placed mid-way through agent replies
  double frame_ms = 80.0;
};

/// Continuous user stream with turn ends and barge-ins at frame midpoints.
DialogueTrace make_dialogue_trace(const TraceShape& shape);

struct ResponseDelayModel {
  double mean_ms = 400.0;
  double jitter_ms = 100.0;  // uniform in [mean - jitter, mean + jitter], floored at 0
  std::uint64_t seed = 1;
};

struct SessionOptions {
  double turn_window_s = 2.0;
  double interrupt_window_s = 2.0;
};

struct EfficiencyReport {
  double rtfx = 0.0;
  double frl_s = 0.0;
  double ttsr = 1.0;
  double int_latency_s = 0.0;
  double isr = 1.0;
  double audio_s = 0.0;
  double processing_s = 0.0;
  std::vector<std::string> warnings;
};

/*
  Serial one-frame-at-a-time processor.  Frame k arriving at a_k starts at
  max(a_k, finish_{k-1}) and finishes after the summed per-frame cost; its
  output is available algorithmic-latency later.  Each turn end and each
  barge-in draws one response delay, in event order, from the delay model.

    turn end at t:   response at max(t, avail(last frame <= t)) + delay
    barge-in at t:   halt     at avail(first frame >= t) + delay
    FRL   = response time of the first turn end minus its timestamp
    TTSR  = share of turn ends answered within turn_window_s
    Int.L = mean halt latency over barge-ins that halt
    ISR   = share of barge-ins halted within interrupt_window_s
    RTFx  = audio seconds / processing seconds (+inf at zero cost)

  With no turn ends FRL = 0 and TTSR = 1; with no barge-ins Int.L = 0 and
  ISR = 1.
*/
EfficiencyReport simulate_session(const StageGraph& g, const DialogueTrace& trace,
                                  const ResponseDelayModel& delay,
                                  const SessionOptions& opts = {});

/// audio_s / processing_s; both must be positive.
double rtfx(double audio_s, double processing_s);

}  // namespace hsaudit

#endif  // HSAUDIT_PIPELINE_H_
