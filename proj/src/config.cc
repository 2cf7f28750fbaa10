// src/config.cc

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

#include "hsaudit/config.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace hsaudit {

using nlohmann::json;

AnonCondition ConditionSpec::anon_condition() const {
  if (input.uses_dumps()) return input.dump_anon;
  return anon ? anon->mode : AnonCondition::None;
}

RunLabels ConditionSpec::labels() const {
  return {system, encoder, anon_condition_name(anon_condition())};
}

namespace {

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Object reader that remembers which keys were consumed, so finish() can
// reject the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) const { return j_.at(key); }
  std::string path(const std::string& key) const { return join_path(path_, key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path(key) + ": " + what);
  }

  void get(const std::string& key, bool* out) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) fail(key, "expected true or false");
    *out = at(key).get<bool>();
  }
  void get(const std::string& key, int* out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer() || v.get<long long>() < INT32_MIN || v.get<long long>() > INT32_MAX)
      fail(key, "expected an integer");
    *out = v.get<int>();
  }
  void get(const std::string& key, std::uint64_t* out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(key, "expected a non-negative integer");
    *out = v.get<std::uint64_t>();
  }
  void get(const std::string& key, double* out) {
    if (!has(key)) return;
    if (!at(key).is_number()) fail(key, "expected a number");
    *out = at(key).get<double>();
  }
  void get(const std::string& key, std::string* out) {
    if (!has(key)) return;
    if (!at(key).is_string()) fail(key, "expected a string");
    *out = at(key).get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

SynthConfig parse_synth(const json& j, const std::string& path, std::string* preset) {
  Section s(j, path);
  s.get("preset", preset);
  SynthConfig cfg = with_path(s.path("preset"), [&] { return synth_preset(*preset); });
  s.get("n_speakers", &cfg.n_speakers);
  s.get("utts_per_speaker", &cfg.utts_per_speaker);
  s.get("frames_per_turn", &cfg.frames_per_turn);
  s.get("dim", &cfg.dim);
  const int preset_layers = cfg.n_layers;
  s.get("n_layers", &cfg.n_layers);
  if (s.has("speaker_scale")) {
    const json& v = s.at("speaker_scale");
    if (v.is_number()) {
      cfg.speaker_scale.assign(std::max(0, cfg.n_layers), v.get<double>());
    } else if (v.is_array()) {
      cfg.speaker_scale.clear();
      for (const auto& x : v) {
        if (!x.is_number()) s.fail("speaker_scale", "expected numbers");
        cfg.speaker_scale.push_back(x.get<double>());
      }
    } else {
      s.fail("speaker_scale", "expected a number or a list of numbers");
    }
  } else if (cfg.n_layers != preset_layers) {
    s.fail("n_layers", "changing n_layers needs a matching speaker_scale");
  }
  s.get("channel_scale", &cfg.channel_scale);
  s.get("noise_scale", &cfg.noise_scale);
  s.get("seed", &cfg.seed);
  s.get("max_turns", &cfg.max_turns);
  s.get("frame_rate_hz", &cfg.frame_rate_hz);
  s.get("speaker_prefix", &cfg.speaker_prefix);
  if (s.has("layers")) {
    const json& v = s.at("layers");
    if (!v.is_array() || v.empty()) s.fail("layers", "expected a non-empty list of layer names");
    cfg.layers.clear();
    for (const auto& x : v) {
      if (!x.is_string()) s.fail("layers", "expected layer names");
      cfg.layers.push_back(with_path(s.path("layers"), [&] { return parse_layer_kind(x); }));
    }
  }
  s.finish();
  with_path(path, [&] { validate_synth_config(cfg); });
  return cfg;
}

std::optional<AnonConfig> parse_anon(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  Section s(j, path);
  AnonConfig a;
  s.get("residual_leak", &a.residual_leak);
  std::string policy = pseudo_policy_name(a.pseudo_policy);
  s.get("pseudo_policy", &policy);
  a.pseudo_policy = with_path(s.path("pseudo_policy"), [&] { return parse_pseudo_policy(policy); });
  std::string mode = anon_condition_name(a.mode);
  s.get("mode", &mode);
  a.mode = with_path(s.path("mode"), [&] { return parse_anon_condition(mode); });
  if (a.mode == AnonCondition::None) s.fail("mode", "expected w2w or w2f (use null for no anonymization)");
  s.finish();
  with_path(path, [&] { validate_anon_config(a); });
  return a;
}

std::map<LayerKind, std::string> parse_dump_map(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object of layer: path");
  std::map<LayerKind, std::string> out;
  for (const auto& [key, value] : j.items()) {
    const LayerKind k = with_path(join_path(path, key), [&] { return parse_layer_kind(key); });
    if (!value.is_string()) throw ConfigError(join_path(path, key) + ": expected a path");
    out[k] = value.get<std::string>();
  }
  return out;
}

InputSpec parse_input(const json& j, const std::string& path) {
  Section s(j, path);
  InputSpec in;
  s.get("synthetic", &in.synthetic);
  std::string anon = anon_condition_name(in.dump_anon);
  s.get("anon", &anon);
  in.dump_anon = with_path(s.path("anon"), [&] { return parse_anon_condition(anon); });
  if (s.has("train_dumps")) in.train_dumps = parse_dump_map(s.at("train_dumps"), s.path("train_dumps"));
  if (s.has("eval_dumps")) in.eval_dumps = parse_dump_map(s.at("eval_dumps"), s.path("eval_dumps"));
  s.finish();
  return in;
}

const std::set<std::string> kConditionKeys = {"system", "encoder", "synth", "anon", "input"};

ConditionSpec parse_condition(const json& j, const std::string& path) {
  Section s(j, path);
  ConditionSpec c;
  s.get("system", &c.system);
  s.get("encoder", &c.encoder);
  c.synth = parse_synth(s.has("synth") ? s.at("synth") : json::object(), s.path("synth"), &c.preset);
  if (s.has("anon")) c.anon = parse_anon(s.at("anon"), s.path("anon"));
  if (s.has("input")) c.input = parse_input(s.at("input"), s.path("input"));
  // Caller checks the remaining keys.
  return c;
}

void parse_attacker(const json& j, AttackerTrainingSpec* t) {
  Section s(j, "attacker");
  s.get("lda_dim", &t->attacker.lda_dim);
  s.get("ridge", &t->attacker.ridge);
  s.get("em_iters", &t->attacker.em_iters);
  s.get("train_speakers", &t->train_speakers);
  s.get("train_utts_per_speaker", &t->train_utts_per_speaker);
  s.finish();
  if (t->attacker.lda_dim < 0) s.fail("lda_dim", "must be >= 0 (0 picks automatically)");
  if (!(t->attacker.ridge >= 0)) s.fail("ridge", "must be >= 0");
  if (t->attacker.em_iters < 1) s.fail("em_iters", "must be >= 1");
  if (t->train_speakers < 2) s.fail("train_speakers", "must be >= 2");
  if (t->train_utts_per_speaker < 2) s.fail("train_utts_per_speaker", "must be >= 2");
}

void parse_metrics(const json& j, LinkabilityConfig* m) {
  Section s(j, "metrics");
  s.get("omega", &m->omega);
  s.get("n_bins", &m->n_bins);
  s.finish();
  if (!(m->omega > 0) || !std::isfinite(m->omega)) s.fail("omega", "must be > 0");
  if (m->n_bins < 2) s.fail("n_bins", "must be >= 2");
}

void parse_turns(const json& j, TurnsSpec* t) {
  Section s(j, "turns");
  s.get("enabled", &t->enabled);
  if (s.has("grid")) {
    const json& v = s.at("grid");
    if (!v.is_array() || v.empty()) s.fail("grid", "expected a non-empty list of turn counts");
    t->grid.clear();
    for (const auto& x : v) {
      if (!x.is_number_integer() || x.get<long long>() < 1 ||
          (!t->grid.empty() && x.get<long long>() <= t->grid.back()))
        s.fail("grid", "expected strictly increasing positive integers");
      t->grid.push_back(x.get<int>());
    }
  }
  std::string mode = t->mode == TurnMode::Cumulative ? "cumulative" : "per-turn";
  s.get("mode", &mode);
  if (mode == "cumulative")
    t->mode = TurnMode::Cumulative;
  else if (mode == "per-turn")
    t->mode = TurnMode::PerTurn;
  else
    s.fail("mode", "expected cumulative or per-turn");
  s.get("utts_per_speaker", &t->utts_per_speaker);
  if (t->utts_per_speaker < 1) s.fail("utts_per_speaker", "must be >= 1");
  s.finish();
}

void parse_pipeline(const json& j, PipelineSpec* p) {
  Section s(j, "pipeline");
  s.get("cost_model", &p->cost_model);
  s.get("trace", &p->trace);
  if (s.has("trace_shape")) {
    Section t(s.at("trace_shape"), s.path("trace_shape"));
    t.get("turns", &p->trace_shape.turns);
    t.get("turn_s", &p->trace_shape.turn_s);
    t.get("gap_s", &p->trace_shape.gap_s);
    t.get("interrupts", &p->trace_shape.interrupts);
    t.get("frame_ms", &p->trace_shape.frame_ms);
    t.finish();
  }
  if (s.has("response_delay")) {
    Section d(s.at("response_delay"), s.path("response_delay"));
    d.get("mean_ms", &p->delay.mean_ms);
    d.get("jitter_ms", &p->delay.jitter_ms);
    d.get("seed", &p->delay.seed);
    d.finish();
    if (!(p->delay.mean_ms >= 0)) d.fail("mean_ms", "must be >= 0");
    if (!(p->delay.jitter_ms >= 0)) d.fail("jitter_ms", "must be >= 0");
  }
  s.get("turn_window_s", &p->session.turn_window_s);
  s.get("interrupt_window_s", &p->session.interrupt_window_s);
  s.get("rtfx_cap", &p->rtfx_cap);
  s.finish();
  if (!(p->session.turn_window_s > 0)) s.fail("turn_window_s", "must be > 0");
  if (!(p->session.interrupt_window_s > 0)) s.fail("interrupt_window_s", "must be > 0");
  if (!(p->rtfx_cap > 0) || !std::isfinite(p->rtfx_cap)) s.fail("rtfx_cap", "must be a positive number");
}

void parse_report(const json& j, RunConfig* cfg) {
  Section s(j, "report");
  if (s.has("formats")) {
    const json& v = s.at("formats");
    if (!v.is_array() || v.empty()) s.fail("formats", "expected a non-empty list");
    cfg->formats.clear();
    for (const auto& x : v) {
      if (!x.is_string()) s.fail("formats", "expected format names");
      cfg->formats.push_back(with_path(s.path("formats"), [&] { return parse_report_format(x); }));
    }
  }
  s.get("name", &cfg->report_name);
  if (cfg->report_name.empty() || cfg->report_name.find('/') != std::string::npos)
    s.fail("name", "expected a plain file stem");
  s.finish();
}

}  // namespace

json reference_sweep() {
  return json::parse(R"([
    {"system": "Moshi", "encoder": "discrete", "synth": {"preset": "moshi-flat"}, "anon": null},
    {"system": "Moshi", "encoder": "discrete", "synth": {"preset": "moshi-flat"},
     "anon": {"mode": "w2w", "residual_leak": 0.6}},
    {"system": "SALM-Duplex", "encoder": "continuous", "synth": {"preset": "salm-decreasing"},
     "anon": null},
    {"system": "SALM-Duplex", "encoder": "continuous", "synth": {"preset": "salm-decreasing"},
     "anon": {"mode": "w2w", "residual_leak": 0.7}},
    {"system": "SALM-Duplex", "encoder": "discrete", "synth": {"preset": "salm-discrete"},
     "anon": null},
    {"system": "SALM-Duplex", "encoder": "discrete", "synth": {"preset": "salm-discrete"},
     "anon": {"mode": "w2f", "residual_leak": 0.0}}
  ])");
}

std::string default_output_dir() {
  const char* env = std::getenv("HSAUDIT_OUT");
  return env && *env ? env : "hsaudit-out";
}

RunConfig parse_run_config(const json& doc) {
  Section s(doc, "");
  RunConfig cfg;
  cfg.output_dir = default_output_dir();
  s.get("output_dir", &cfg.output_dir);
  if (cfg.output_dir.empty()) s.fail("output_dir", "must not be empty");
  s.get("seed", &cfg.seed);

  json base = json::object();
  for (const auto& key : kConditionKeys)
    if (s.has(key)) base[key] = doc.at(key);
  cfg.base = parse_condition(base, "");

  if (s.has("attacker")) parse_attacker(s.at("attacker"), &cfg.training);
  if (s.has("metrics")) parse_metrics(s.at("metrics"), &cfg.metrics);
  if (s.has("turns")) parse_turns(s.at("turns"), &cfg.turns);
  if (s.has("pipeline")) parse_pipeline(s.at("pipeline"), &cfg.pipeline);
  if (s.has("report")) parse_report(s.at("report"), &cfg);

  if (s.has("conditions")) {
    json list = s.at("conditions");
    if (list.is_string()) {
      if (list.get<std::string>() != "reference-sweep")
        s.fail("conditions", "expected a list or \"reference-sweep\"");
      list = reference_sweep();
    }
    if (!list.is_array() || list.empty()) s.fail("conditions", "expected a non-empty list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "conditions[" + std::to_string(i) + "]";
      if (!list[i].is_object()) throw ConfigError(path + ": expected an object");
      for (const auto& [key, value] : list[i].items())
        if (!kConditionKeys.count(key)) throw ConfigError("unknown key '" + path + "." + key + "'");
      json merged = base;
      merged.merge_patch(list[i]);
      cfg.conditions.push_back(parse_condition(merged, path));
    }
  } else {
    cfg.conditions.push_back(cfg.base);
  }
  s.finish();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  if (!doc.is_object()) doc = json::object();
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object())
      throw ConfigError("override key '" + key + "': '" + part + "' is not an object");
    node = &next;
    start = dot + 1;
  }
}

}  // namespace hsaudit
