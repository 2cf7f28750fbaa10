// src/pipeline.cc

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

#include "hsaudit/pipeline.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hsaudit/formats.h"
#include "hsaudit/rng.h"

namespace hsaudit {

double StageGraph::per_frame_cost_ms() const {
  double s = 0.0;
  for (const auto& st : stages) s += st.per_frame_cost_ms;
  return s;
}

double StageGraph::latency_ms() const {
  double s = 0.0;
  for (const auto& st : stages) s += st.algorithmic_latency_ms;
  return s;
}

std::vector<std::string> topology_stage_names(AnonCondition condition) {
  switch (condition) {
    case AnonCondition::None: return {"encoder", "llm_step", "decoder"};
    case AnonCondition::W2W: return {"anonymizer", "synthesis", "encoder", "llm_step", "decoder"};
    case AnonCondition::W2F: return {"anonymizer-feature", "llm_step", "decoder"};
  }
  return {};
}

StageGraph build_topology(AnonCondition condition, const CostModel& costs) {
  StageGraph g;
  g.condition = condition;
  for (const auto& name : topology_stage_names(condition)) {
    auto it = costs.find(name);
    if (it == costs.end())
      throw ConfigError("cost model has no entry for stage '" + name + "' required by " +
                        anon_condition_name(condition));
    g.stages.push_back({name, it->second.per_frame_cost_ms, it->second.algorithmic_latency_ms});
  }
  return g;
}

namespace {

bool parse_double(const std::string& s, double* out) {
  const char* first = s.data();
  const char* last = first + s.size();
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last && std::isfinite(*out);
}

}  // namespace

CostModel parse_cost_model(std::istream& text) {
  CostModel out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(text, line)) {
    ++lineno;
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ss(line);
    std::string name, a, b, extra;
    ss >> name >> a >> b;
    double cost = 0, lat = 0;
    if (b.empty() || (ss >> extra) || !parse_double(a, &cost) || !parse_double(b, &lat) ||
        cost < 0 || lat < 0)
      throw ConfigError("cost model line " + std::to_string(lineno) +
                        ": expected '<stage> <per_frame_ms >= 0> <latency_ms >= 0>'");
    if (!out.emplace(name, StageCost{cost, lat}).second)
      throw ConfigError("cost model line " + std::to_string(lineno) + ": duplicate stage '" +
                        name + "'");
  }
  return out;
}

void write_cost_model(const CostModel& costs, std::ostream& sink) {
  for (const auto& [name, c] : costs)
    sink << name << ' ' << format_shortest(c.per_frame_cost_ms) << ' '
         << format_shortest(c.algorithmic_latency_ms) << '\n';
}

CostModel default_cost_model() {
  return {
      {"encoder", {0.10, 0.0}},
      {"llm_step", {0.20, 0.0}},
      {"decoder", {0.04, 0.0}},
      {"anonymizer", {30.0, 200.0}},
      {"synthesis", {16.0, 80.0}},
      {"anonymizer-feature", {31.5, 60.0}},
  };
}

std::string event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::UserSpeechFrame: return "UserSpeechFrame";
    case EventKind::UserTurnEnd: return "UserTurnEnd";
    case EventKind::UserInterruptStart: return "UserInterruptStart";
  }
  return "?";
}

void validate_trace(const DialogueTrace& trace) {
  if (trace.events.empty()) throw DataError("empty trace");
  if (!(trace.frame_ms > 0)) throw DataError("frame_ms must be positive");
  double last_t = -std::numeric_limits<double>::infinity();
  double last_frame = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    if (!std::isfinite(e.t_ms) || e.t_ms <= last_t)
      throw DataError("trace event " + std::to_string(i + 1) + ": timestamps must strictly increase");
    last_t = e.t_ms;
    if (e.kind != EventKind::UserSpeechFrame) continue;
    if (!std::isnan(last_frame)) {
      const double periods = (e.t_ms - last_frame) / trace.frame_ms;
      if (std::abs(periods - std::round(periods)) > 1e-6)
        throw DataError("trace event " + std::to_string(i + 1) +
                        ": speech frame off the frame grid");
    }
    last_frame = e.t_ms;
  }
}

DialogueTrace parse_trace(std::istream& text, double frame_ms) {
  DialogueTrace trace;
  trace.frame_ms = frame_ms;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(text, line)) {
    ++lineno;
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ss(line);
    std::string t, kind, extra;
    ss >> t >> kind;
    double v = 0;
    const auto bad = [&] {
      return DataError("trace line " + std::to_string(lineno) +
                       ": expected '<t_ms> <UserSpeechFrame|UserTurnEnd|UserInterruptStart>'");
    };
    if (kind.empty() || (ss >> extra) || !parse_double(t, &v)) throw bad();
    TraceEvent e{v, EventKind::UserSpeechFrame};
    if (kind == "UserSpeechFrame")
      e.kind = EventKind::UserSpeechFrame;
    else if (kind == "UserTurnEnd")
      e.kind = EventKind::UserTurnEnd;
    else if (kind == "UserInterruptStart")
      e.kind = EventKind::UserInterruptStart;
    else
      throw bad();
    if (!trace.events.empty() && v <= trace.events.back().t_ms)
      throw DataError("trace line " + std::to_string(lineno) + ": timestamp not increasing");
    trace.events.push_back(e);
  }
  validate_trace(trace);
  return trace;
}

void write_trace(const DialogueTrace& trace, std::ostream& sink) {
  for (const auto& e : trace.events)
    sink << format_shortest(e.t_ms) << ' ' << event_kind_name(e.kind) << '\n';
}

DialogueTrace make_dialogue_trace(const TraceShape& shape) {
  if (shape.turns < 1 || shape.turn_s <= 0 || shape.gap_s <= 0 || shape.frame_ms <= 0 ||
      shape.interrupts < 0)
    throw ConfigError("invalid trace shape");
  const auto frames_per = [&](double s) {
    return std::max(1L, std::lround(s * 1000.0 / shape.frame_ms));
  };
  const long turn_frames = frames_per(shape.turn_s);
  const long gap_frames = frames_per(shape.gap_s);
  const int interrupts = std::min(shape.interrupts, shape.turns);

  DialogueTrace trace;
  trace.frame_ms = shape.frame_ms;
  const double half = shape.frame_ms / 2.0;
  long k = 0;
  for (int turn = 0; turn < shape.turns; ++turn) {
    for (long f = 0; f < turn_frames; ++f)
      trace.events.push_back({++k * shape.frame_ms, EventKind::UserSpeechFrame});
    trace.events.push_back({k * shape.frame_ms + half, EventKind::UserTurnEnd});
    for (long f = 0; f < gap_frames; ++f) {
      trace.events.push_back({++k * shape.frame_ms, EventKind::UserSpeechFrame});
      // Barge in halfway through the agent's reply on the first turns.
      if (turn < interrupts && f == gap_frames / 2)
        trace.events.push_back({k * shape.frame_ms + half, EventKind::UserInterruptStart});
    }
  }
  return trace;
}

EfficiencyReport simulate_session(const StageGraph& g, const DialogueTrace& trace,
                                  const ResponseDelayModel& delay, const SessionOptions& opts) {
  validate_trace(trace);
  if (delay.mean_ms < 0 || delay.jitter_ms < 0)
    throw ConfigError("response delay mean and jitter must be >= 0");
  const double cost = g.per_frame_cost_ms();
  const double latency = g.latency_ms();

  // Frame arrivals and output availability times.
  std::vector<double> arrival, avail;
  double finish = -std::numeric_limits<double>::infinity();
  for (const auto& e : trace.events) {
    if (e.kind != EventKind::UserSpeechFrame) continue;
    const double start = std::max(e.t_ms, finish);
    finish = start + cost;
    arrival.push_back(e.t_ms);
    avail.push_back(finish + latency);
  }

  Rng rng(derive_seed(delay.seed, "response-delay"));
  auto draw = [&] {
    const double u = rng.uniform();
    return std::max(0.0, delay.mean_ms + delay.jitter_ms * (2.0 * u - 1.0));
  };

  EfficiencyReport r;
  const double turn_window = opts.turn_window_s * 1000.0;
  const double int_window = opts.interrupt_window_s * 1000.0;
  std::size_t turn_ends = 0, answered = 0, interrupts = 0, halted_in_window = 0, halted = 0;
  double halt_sum = 0.0;
  bool first_turn = true;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::UserTurnEnd) {
      const double d = draw();
      auto it = std::upper_bound(arrival.begin(), arrival.end(), e.t_ms);
      double ready = e.t_ms;
      if (it != arrival.begin()) ready = std::max(ready, avail[(it - arrival.begin()) - 1]);
      const double latency_ms = ready + d - e.t_ms;
      if (first_turn) {
        r.frl_s = latency_ms / 1000.0;
        first_turn = false;
      }
      ++turn_ends;
      answered += latency_ms <= turn_window;
    } else if (e.kind == EventKind::UserInterruptStart) {
      const double d = draw();
      ++interrupts;
      auto it = std::lower_bound(arrival.begin(), arrival.end(), e.t_ms);
      if (it == arrival.end()) continue;
      const double halt_ms = avail[it - arrival.begin()] + d - e.t_ms;
      ++halted;
      halt_sum += halt_ms;
      halted_in_window += halt_ms <= int_window;
    }
  }
  r.ttsr = turn_ends ? static_cast<double>(answered) / turn_ends : 1.0;
  r.isr = interrupts ? static_cast<double>(halted_in_window) / interrupts : 1.0;
  r.int_latency_s = halted ? halt_sum / halted / 1000.0 : 0.0;

  if (arrival.empty()) throw DataError("trace has no speech frames");
  const double n_frames = static_cast<double>(arrival.size());
  r.audio_s = n_frames * trace.frame_ms / 1000.0;
  r.processing_s = n_frames * cost / 1000.0;
  if (r.processing_s > 0.0) {
    r.rtfx = r.audio_s / r.processing_s;
  } else {
    r.rtfx = std::numeric_limits<double>::infinity();
    r.warnings.push_back("zero processing time; RTFx is unbounded");
  }
  return r;
}

double rtfx(double audio_s, double processing_s) {
  if (!(audio_s > 0.0) || !(processing_s > 0.0))
    throw DataError("RTFx needs positive audio and processing durations");
  return audio_s / processing_s;
}

}  // namespace hsaudit
