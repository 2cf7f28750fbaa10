// src/workflow.cc

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

#include "hsaudit/workflow.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hsaudit/formats.h"
#include "hsaudit/rng.h"

namespace hsaudit {

namespace {

// Prefixes the message with the failing stage, keeping the error type.
template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(name + ": " + e.what());
  }
}

std::string describe(const RunLabels& l) { return l.system + "/" + l.encoder + "/" + l.anon; }

LayerKind pooled_kind(const std::vector<LayerKind>& kinds) {
  if (std::find(kinds.begin(), kinds.end(), LayerKind::MeanPooledAll) != kinds.end())
    return LayerKind::MeanPooledAll;
  return kinds.back();
}

std::map<LayerKind, Dataset> by_layer(const Dataset& d, const std::vector<LayerKind>& kinds) {
  std::map<LayerKind, Dataset> out;
  const auto tags = layers_of(d);
  for (LayerKind k : kinds) {
    auto it = std::find_if(tags.begin(), tags.end(), [&](const LayerTag& t) { return t.kind == k; });
    if (it == tags.end()) throw DataError("no records for the " + layer_kind_name(k) + " layer");
    out.emplace(k, select_layer(d, *it));
  }
  return out;
}

}  // namespace

SynthConfig eval_synth_config(const ConditionSpec& c) { return c.synth; }

SynthConfig training_synth_config(const RunConfig& cfg, const ConditionSpec& c) {
  SynthConfig t = c.synth;
  t.n_speakers = cfg.training.train_speakers;
  t.utts_per_speaker = cfg.training.train_utts_per_speaker;
  t.speaker_prefix = "trn";
  t.seed = derive_seed(cfg.seed, "attacker-train:" + std::to_string(c.synth.seed));
  return t;
}

std::uint64_t anonymizer_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "anonymizer"); }

Dataset load_dump_dataset(const std::string& path, Split split, AnonCondition anon) {
  Dataset d{read_dump_file(path), split, Provenance::Extracted, anon};
  const auto violations = validate_dataset(d);
  if (!violations.empty())
    throw DataError(path + ": " + std::to_string(violations.size()) + " invalid record(s), first '" +
                    violations.front().utterance_id + "': " + violations.front().message);
  return d;
}

ConditionData load_condition_data(const RunConfig& cfg, const ConditionSpec& c,
                                  bool with_dialogues, bool pooled_only) {
  ConditionData out;
  if (c.input.uses_dumps()) {
    std::vector<LayerKind> kinds;
    for (const auto& [k, path] : c.input.eval_dumps) kinds.push_back(k);
    out.pooled = pooled_kind(kinds);
    if (pooled_only) kinds = {out.pooled};
    for (LayerKind k : kinds) {
      auto it = c.input.train_dumps.find(k);
      if (it == c.input.train_dumps.end())
        throw DataError("no training dump for the " + layer_kind_name(k) + " layer");
      const Dataset train = load_dump_dataset(it->second, Split::AttackerTrain, c.input.dump_anon);
      const Dataset eval = load_dump_dataset(c.input.eval_dumps.at(k), Split::Trial, c.input.dump_anon);
      out.train.emplace(k, by_layer(train, {k}).at(k));
      out.eval.emplace(k, by_layer(eval, {k}).at(k));
    }
    if (with_dialogues) out.dialogues = out.eval.at(out.pooled);
    return out;
  }
  if (!c.input.synthetic)
    throw DataError("no input data: set input.eval_dumps and input.train_dumps, or input.synthetic");

  SynthConfig ecfg = eval_synth_config(c);
  SynthConfig tcfg = training_synth_config(cfg, c);
  out.pooled = pooled_kind(ecfg.layers);
  if (pooled_only) ecfg.layers = tcfg.layers = {out.pooled};
  Dataset eval = gen_population(ecfg, Split::Trial);
  Dataset train = gen_population(tcfg, Split::AttackerTrain);
  const std::uint64_t seed = anonymizer_seed(cfg);
  if (c.anon) {
    eval = apply_anon(eval, ecfg, *c.anon, seed);
    train = apply_anon(train, tcfg, *c.anon, seed);
  }
  out.eval = by_layer(eval, ecfg.layers);
  out.train = by_layer(train, ecfg.layers);
  if (with_dialogues) {
    // Utterances are keyed by id, so the first utts_per_speaker of every
    // speaker here are the evaluation utterances themselves.
    SynthConfig dcfg = ecfg;
    dcfg.utts_per_speaker = cfg.turns.utts_per_speaker;
    dcfg.layers = {out.pooled};
    Dataset dlg = gen_population(dcfg, Split::Trial);
    if (c.anon) dlg = apply_anon(dlg, dcfg, *c.anon, seed);
    out.dialogues = std::move(dlg);
  }
  return out;
}

AuditResult run_audit(const RunConfig& cfg, const AuditOptions& opts, const ProgressSink& progress) {
  AuditResult result;
  LayerTable table;
  for (const auto& c : cfg.conditions) {
    const RunLabels labels = c.labels();
    const std::string where = describe(labels);
    if (progress) progress("condition " + where);

    const ConditionData data = stage("data [" + where + "]", [&] {
      return load_condition_data(cfg, c, opts.turns && cfg.turns.enabled, !opts.all_layers);
    });

    ConditionOutcome o;
    o.labels = labels;
    o.pooled = data.pooled;
    AttackerConfig ac = cfg.training.attacker;
    ac.condition = c.anon_condition() == AnonCondition::None ? TrainingCondition::OnClean
                                                             : TrainingCondition::LazyInformed;
    o.attacker = training_condition_name(ac.condition);

    std::optional<Attacker> pooled_attacker;
    for (const auto& [kind, eval] : data.eval) {
      const std::string at = where + ", " + layer_kind_name(kind);
      if (progress) progress("  layer " + layer_kind_name(kind));
      Attacker atk = stage("train [" + at + "]", [&] { return train_attacker(data.train.at(kind), ac); });
      ScoreSet s = stage("score [" + at + "]", [&] {
        auto [enroll, test] = split_enroll_trial(eval);
        return score_trials(atk, enroll, test, make_trials(enroll, test));
      });
      o.eer[kind] = stage("metrics [" + at + "]", [&] { return compute_eer(s); });
      o.scores.emplace(kind, std::move(s));
      if (kind == data.pooled) pooled_attacker = std::move(atk);
    }
    o.linkability = stage("metrics [" + where + "]", [&] {
      return compute_linkability(o.scores.at(data.pooled), cfg.metrics);
    });
    for (const auto& w : o.linkability.warnings) result.warnings.push_back(where + ": " + w);

    if (data.dialogues) {
      if (progress) progress("  turns");
      o.curve = stage("turns [" + where + "]", [&] {
        return turnwise_curve(*pooled_attacker, *data.dialogues, cfg.turns.grid, cfg.metrics,
                              cfg.turns.mode, labels.system + " " + labels.encoder + " " + labels.anon);
      });
    }

    result.report.privacy.push_back(
        {labels, o.attacker, o.eer.at(data.pooled).eer, o.linkability.d_sys});
    if (o.scores.size() == 4) {
      LayerRun run{labels, {}};
      for (const auto& [kind, s] : o.scores) run.scores.emplace(kind, s);
      table.rows.push_back(build_layer_table({run}).rows.front());
    }
    if (o.curve) result.report.curves.push_back(*o.curve);
    result.conditions.push_back(std::move(o));
  }
  if (!table.rows.empty()) result.report.tables.push_back(std::move(table));
  if (opts.efficiency) {
    if (progress) progress("pipeline");
    result.report.efficiency = stage("pipeline", [&] { return run_pipeline(cfg.pipeline); });
    for (const auto& e : result.report.efficiency)
      for (const auto& w : e.report.warnings) result.warnings.push_back(e.label + ": " + w);
  }
  return result;
}

std::vector<EfficiencyRow> run_pipeline(const PipelineSpec& spec) {
  CostModel costs = default_cost_model();
  if (!spec.cost_model.empty()) {
    std::ifstream in(spec.cost_model);
    if (!in) throw ConfigError("cannot open cost model '" + spec.cost_model + "'");
    try {
      costs = parse_cost_model(in);
    } catch (const ConfigError& e) {
      throw ConfigError(spec.cost_model + ": " + e.what());
    }
  }
  DialogueTrace trace;
  if (spec.trace.empty()) {
    trace = make_dialogue_trace(spec.trace_shape);
  } else {
    std::ifstream in(spec.trace);
    if (!in) throw DataError("cannot open trace '" + spec.trace + "'");
    try {
      trace = parse_trace(in, spec.trace_shape.frame_ms);
    } catch (const DataError& e) {
      throw DataError(spec.trace + ": " + e.what());
    }
  }

  std::vector<EfficiencyRow> rows;
  for (AnonCondition c : {AnonCondition::None, AnonCondition::W2W, AnonCondition::W2F}) {
    EfficiencyReport r = simulate_session(build_topology(c, costs), trace, spec.delay, spec.session);
    if (!std::isfinite(r.rtfx)) {
      r.rtfx = spec.rtfx_cap;
      r.warnings = {"zero processing time; RTFx capped at " + format_shortest(spec.rtfx_cap)};
    }
    rows.push_back({anon_condition_name(c), std::move(r)});
  }
  return rows;
}

void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw DataError("cannot create output directory '" + dir + "'" +
                    (ec ? ": " + ec.message() : std::string()));
}

std::string turn_plot_csv(const Report& report) {
  std::ostringstream os;
  os << "curve,turns,privacy\n";
  for (const auto& c : report.curves)
    for (const auto& p : c.points) os << c.label << ',' << p.turns << ',' << format_shortest(p.privacy) << '\n';
  return os.str();
}

std::vector<std::string> write_reports(const Report& report, const RunConfig& cfg) {
  ensure_output_dir(cfg.output_dir);
  std::vector<std::pair<std::string, std::string>> files;
  for (ReportFormat f : cfg.formats) {
    const char* ext = f == ReportFormat::Csv ? ".csv" : f == ReportFormat::Markdown ? ".md" : ".json";
    files.emplace_back(cfg.report_name + ext, emit_report(report, f));
  }
  if (!report.curves.empty()) files.emplace_back(cfg.report_name + "_turns.csv", turn_plot_csv(report));

  std::vector<std::string> paths;
  for (const auto& [name, text] : files) {
    const std::string path = (std::filesystem::path(cfg.output_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write '" + path + "'");
    paths.push_back(path);
  }
  return paths;
}

}  // namespace hsaudit
