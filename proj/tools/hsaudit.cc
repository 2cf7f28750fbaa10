// tools/hsaudit.cc

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

// hsaudit: command-line front end.  Exit codes: 0 success, 2 configuration
// error, 3 data error, 4 internal error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hsaudit/analysis.h"
#include "hsaudit/attacker.h"
#include "hsaudit/config.h"
#include "hsaudit/formats.h"
#include "hsaudit/metrics.h"
#include "hsaudit/synth.h"
#include "hsaudit/workflow.h"
#include "json.hpp"

namespace {

using namespace hsaudit;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
  std::string out;
  bool verbose = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "JSON run configuration (defaults apply when omitted)");
    cmd->add_option("--set", sets, "Override a config key, e.g. --set synth.seed=7 (repeatable)");
    cmd->add_option("-o,--out", out, "Output directory (overrides output_dir and $HSAUDIT_OUT)");
    cmd->add_flag("-v,--verbose", verbose, "Print progress to stderr");
  }

  RunConfig load() const {
    json doc = json::object();
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open config '" + path + "'");
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
      }
    }
    for (const auto& s : sets) apply_override(doc, s);
    if (!out.empty()) doc["output_dir"] = out;
    return parse_run_config(doc);
  }

  ProgressSink progress() const {
    if (!verbose) return nullptr;
    return [](const std::string& m) { std::cerr << m << '\n'; };
  }
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) ensure_output_dir(parent.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

// A dump restricted to one layer; `layer` may be empty when it holds one.
Dataset single_layer(Dataset d, const std::string& layer, const std::string& path) {
  const auto tags = layers_of(d);
  if (layer.empty()) {
    if (tags.size() != 1)
      throw ConfigError(path + " holds " + std::to_string(tags.size()) +
                        " layers; choose one with --layer");
    return d;
  }
  const LayerKind k = parse_layer_kind(layer);
  for (const auto& t : tags)
    if (t.kind == k) return select_layer(d, t);
  throw DataError(path + " has no " + layer + " layer");
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void print_paths(const std::vector<std::string>& paths) {
  for (const auto& p : paths) std::cout << "wrote " << p << '\n';
}

int cmd_gen(const ConfigFlags& flags, bool with_train) {
  const RunConfig cfg = flags.load();
  const ConditionSpec& c = cfg.base;
  ensure_output_dir(cfg.output_dir);

  json manifest;
  manifest["format"] = "hsaudit.manifest/1";
  manifest["preset"] = c.preset;
  manifest["files"] = json::array();
  auto emit = [&](const SynthConfig& sc, Split split, const std::string& prefix) {
    const Dataset d = gen_population(sc, split);
    for (const auto& tag : layers_of(d)) {
      const Dataset layer = select_layer(d, tag);
      const std::string name = prefix + "_" + layer_kind_name(tag.kind) + ".hsd";
      const std::string path = (std::filesystem::path(cfg.output_dir) / name).string();
      const auto bytes = write_dump_file(layer.records, path);
      manifest["files"].push_back({{"file", name},
                                   {"split", prefix},
                                   {"layer", layer_kind_name(tag.kind)},
                                   {"layer_index", tag.index},
                                   {"n_layers", tag.n_layers},
                                   {"records", layer.records.size()},
                                   {"bytes", bytes}});
    }
    manifest[prefix] = {{"speakers", sc.n_speakers},
                        {"utts_per_speaker", sc.utts_per_speaker},
                        {"frames_per_turn", sc.frames_per_turn},
                        {"dim", sc.dim},
                        {"n_layers", sc.n_layers},
                        {"seed", sc.seed},
                        {"speaker_prefix", sc.speaker_prefix}};
    std::cout << prefix << ": " << sc.n_speakers << " speakers x " << sc.utts_per_speaker
              << " utterances, " << sc.layers.size() << " layers, dim " << sc.dim << '\n';
  };
  emit(eval_synth_config(c), Split::Trial, "eval");
  if (with_train) emit(training_synth_config(cfg, c), Split::AttackerTrain, "train");

  const std::string path = (std::filesystem::path(cfg.output_dir) / "manifest.json").string();
  open_out(path) << manifest.dump(2) << '\n';
  std::cout << "wrote " << manifest["files"].size() << " dump files and " << path << '\n';
  return 0;
}

int cmd_anon(const ConfigFlags& flags, const std::string& dump, const std::string& out,
             const std::string& population) {
  const RunConfig cfg = flags.load();
  const ConditionSpec& c = cfg.base;
  if (!c.anon) throw ConfigError("anon: the configuration has no anon section");
  SynthConfig sc;
  if (population == "eval")
    sc = eval_synth_config(c);
  else if (population == "train")
    sc = training_synth_config(cfg, c);
  else
    throw ConfigError("--population must be eval or train");
  Dataset d = load_dump_dataset(dump, Split::Trial, AnonCondition::None);
  d.provenance = Provenance::Synthetic;  // produced by gen with this config
  const Dataset a = apply_anon(d, sc, *c.anon, anonymizer_seed(cfg));
  const auto bytes = write_dump_file(a.records, out);
  std::cout << "anonymized " << a.records.size() << " records (" << anon_condition_name(a.anon_condition)
            << ", rho " << c.anon->residual_leak << ") -> " << out << " (" << bytes << " bytes)\n";
  return 0;
}

int cmd_train(const ConfigFlags& flags, const std::string& dump, const std::string& layer,
              std::string anon, const std::string& out) {
  const RunConfig cfg = flags.load();
  const AnonCondition condition =
      anon.empty() ? cfg.base.anon_condition() : parse_anon_condition(anon);
  const Dataset d =
      single_layer(load_dump_dataset(dump, Split::AttackerTrain, condition), layer, dump);
  AttackerConfig ac = cfg.training.attacker;
  ac.condition = condition == AnonCondition::None ? TrainingCondition::OnClean
                                                  : TrainingCondition::LazyInformed;
  const Attacker atk = train_attacker(d, ac);
  auto sink = open_out(out);
  save_attacker(atk, sink);
  std::cout << "trained " << training_condition_name(ac.condition) << " attacker on "
            << d.records.size() << " utterances: lda " << atk.lda.basis.rows() << " -> "
            << atk.lda.basis.cols() << ", plda loglik " << atk.plda.em_loglik_trace.back()
            << " -> " << out << '\n';
  return 0;
}

int cmd_score(const std::string& attacker, const std::string& enroll_path,
              const std::string& test_path, const std::string& trials_path,
              const std::string& layer, const std::string& out) {
  auto in = open_in(attacker);
  const Attacker atk = load_attacker(in);
  Dataset enroll = single_layer(load_dump_dataset(enroll_path, Split::Enroll, AnonCondition::None),
                                layer, enroll_path);
  Dataset test;
  if (test_path.empty()) {
    std::tie(enroll, test) = split_enroll_trial(enroll);
  } else {
    test = single_layer(load_dump_dataset(test_path, Split::Trial, AnonCondition::None), layer,
                        test_path);
  }
  TrialList trials;
  if (trials_path.empty()) {
    trials = make_trials(enroll, test);
  } else {
    auto t = open_in(trials_path);
    trials = parse_trials(t);
  }
  const ScoreSet s = score_trials(atk, enroll, test, trials);
  auto sink = open_out(out);
  write_scores(s, sink);
  std::cout << "scored " << s.mated.size() << " mated and " << s.non_mated.size()
            << " non-mated trials -> " << out << '\n';
  return 0;
}

ScoreSet load_scores(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_scores(in);
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

int cmd_eer(const std::string& scores, const std::string& det_path) {
  const ScoreSet s = load_scores(scores);
  const EerResult r = compute_eer(s);
  std::cout << "eer " << format_shortest(r.eer) << " (" << sig3(100 * r.eer) << "%)\n"
            << "threshold " << format_shortest(r.threshold) << '\n'
            << "mated " << r.n_mated << "\nnon_mated " << r.n_non_mated << '\n';
  if (r.inverted) std::cout << "inverted (scores separate the classes the wrong way round)\n";
  if (!det_path.empty()) {
    auto out = open_out(det_path);
    out << "threshold,far,frr\n";
    for (const auto& p : compute_det(s))
      out << format_shortest(p.threshold) << ',' << format_shortest(p.far) << ','
          << format_shortest(p.frr) << '\n';
  }
  return 0;
}

int cmd_linkability(const std::string& scores, double omega, int bins, bool per_bin) {
  const LinkabilityResult r = compute_linkability(load_scores(scores), omega, bins);
  print_warnings(r.warnings);
  std::cout << "linkability " << format_shortest(r.d_sys) << "\nprivacy "
            << format_shortest(privacy_score(r.d_sys)) << '\n';
  if (per_bin) {
    std::cout << "center,local,mated_mass\n";
    for (const auto& b : r.per_bin)
      std::cout << format_shortest(b.center) << ',' << format_shortest(b.local) << ','
                << format_shortest(b.mated_mass) << '\n';
  }
  return 0;
}

int cmd_audit(const ConfigFlags& flags, const AuditOptions& opts, ReportFormat print_as) {
  const RunConfig cfg = flags.load();
  const AuditResult r = run_audit(cfg, opts, flags.progress());
  print_warnings(r.warnings);
  const auto paths = write_reports(r.report, cfg);
  std::cout << emit_report(r.report, print_as);
  print_paths(paths);
  return 0;
}

int cmd_pipeline(const ConfigFlags& flags, const std::string& cost_model, const std::string& trace) {
  RunConfig cfg = flags.load();
  if (!cost_model.empty()) cfg.pipeline.cost_model = cost_model;
  if (!trace.empty()) cfg.pipeline.trace = trace;
  Report report;
  report.efficiency = run_pipeline(cfg.pipeline);
  for (const auto& e : report.efficiency)
    for (const auto& w : e.report.warnings) std::cerr << "warning: " << e.label << ": " << w << '\n';
  const auto paths = write_reports(report, cfg);
  std::cout << emit_report(report, ReportFormat::Markdown);
  print_paths(paths);
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& format, const std::string& out) {
  auto in = open_in(in_path);
  const Report r = parse_report_json(in);
  const std::string text = emit_report(r, parse_report_format(format));
  if (out.empty())
    std::cout << text;
  else
    open_out(out) << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hsaudit: audit speaker-identity leakage in dialogue-model hidden states"};
  app.require_subcommand(1);
  std::function<int()> run;

  ConfigFlags gen_flags;
  bool with_train = false;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic population as .hsd dumps plus a manifest");
  gen_flags.add_to(gen);
  gen->add_flag("--with-train", with_train, "Also write the attacker-training population");
  gen->callback([&] { run = [&] { return cmd_gen(gen_flags, with_train); }; });

  ConfigFlags anon_flags;
  std::string anon_dump, anon_out, population = "eval";
  auto* anon = app.add_subcommand("anon", "Apply the configured anonymizer to a synthetic dump");
  anon_flags.add_to(anon);
  anon->add_option("--dump", anon_dump, "Input .hsd written by gen with the same config")->required();
  anon->add_option("--output", anon_out, "Output .hsd")->required();
  anon->add_option("--population", population, "Which generated population the dump holds")
      ->check(CLI::IsMember({"eval", "train"}));
  anon->callback([&] { run = [&] { return cmd_anon(anon_flags, anon_dump, anon_out, population); }; });

  ConfigFlags train_flags;
  std::string train_dump, train_layer, train_anon, train_out;
  auto* train = app.add_subcommand("train", "Train a pooling/whitening/LDA/PLDA attacker on a dump");
  train_flags.add_to(train);
  train->add_option("--dump", train_dump, "Training .hsd")->required();
  train->add_option("--layer", train_layer, "Layer to use when the dump holds several")
      ->check(CLI::IsMember({"early", "mid", "late", "all"}));
  train->add_option("--anon", train_anon,
                    "Anonymization applied to the dump (default: from config); anything "
                    "but none trains a lazy-informed attacker")
      ->check(CLI::IsMember({"none", "w2w", "w2f"}));
  train->add_option("--attacker", train_out, "Output attacker JSON")->required();
  train->callback([&] {
    run = [&] { return cmd_train(train_flags, train_dump, train_layer, train_anon, train_out); };
  });

  std::string score_atk, score_enroll, score_test, score_trials, score_layer, score_out;
  auto* score = app.add_subcommand("score", "Score verification trials with a trained attacker");
  score->add_option("--attacker", score_atk, "Attacker JSON from train")->required();
  score->add_option("--enroll", score_enroll, "Enrollment .hsd")->required();
  score->add_option("--test", score_test,
                    "Test .hsd (default: alternate the enrollment dump's utterances)");
  score->add_option("--trials", score_trials,
                    "Trial list '<enroll> <test> <target|nontarget>' (default: all pairs)");
  score->add_option("--layer", score_layer, "Layer to use when dumps hold several")
      ->check(CLI::IsMember({"early", "mid", "late", "all"}));
  score->add_option("--scores", score_out, "Output score file")->required();
  score->callback([&] {
    run = [&] {
      return cmd_score(score_atk, score_enroll, score_test, score_trials, score_layer, score_out);
    };
  });

  std::string eer_scores, eer_det;
  auto* eer = app.add_subcommand("eer", "Equal error rate of a score file");
  eer->add_option("--scores", eer_scores, "Score file")->required();
  eer->add_option("--det", eer_det, "Also write DET points as CSV");
  eer->callback([&] { run = [&] { return cmd_eer(eer_scores, eer_det); }; });

  std::string lnk_scores;
  double omega = 1.0;
  int bins = 30;
  bool per_bin = false;
  auto* lnk = app.add_subcommand("linkability", "Score-based linkability of a score file");
  lnk->add_option("--scores", lnk_scores, "Score file")->required();
  lnk->add_option("--omega", omega, "Prior odds of a mated pair")->check(CLI::PositiveNumber);
  lnk->add_option("--bins", bins, "Histogram bins")->check(CLI::Range(2, 1000000));
  lnk->add_flag("--per-bin", per_bin, "Print per-bin local linkability");
  lnk->callback([&] { run = [&] { return cmd_linkability(lnk_scores, omega, bins, per_bin); }; });

  ConfigFlags layers_flags;
  auto* layers = app.add_subcommand("layers", "Layer-wise EER table for the configured conditions");
  layers_flags.add_to(layers);
  layers->callback([&] {
    run = [&] { return cmd_audit(layers_flags, {true, false, false}, ReportFormat::Markdown); };
  });

  ConfigFlags turns_flags;
  auto* turns = app.add_subcommand("turns", "Privacy against dialogue turns for the configured conditions");
  turns_flags.add_to(turns);
  turns->callback([&] {
    run = [&] { return cmd_audit(turns_flags, {false, true, false}, ReportFormat::Markdown); };
  });

  ConfigFlags pipe_flags;
  std::string cost_model, trace;
  auto* pipe = app.add_subcommand("pipeline", "Simulate None, W2W and W2F streaming sessions");
  pipe_flags.add_to(pipe);
  pipe->add_option("--cost-model", cost_model, "Cost model '<stage> <per_frame_ms> <latency_ms>'");
  pipe->add_option("--trace", trace, "Trace file '<t_ms> <event_kind>'");
  pipe->callback([&] { run = [&] { return cmd_pipeline(pipe_flags, cost_model, trace); }; });

  ConfigFlags audit_flags;
  auto* audit = app.add_subcommand(
      "audit", "Full audit: attackers, EER, linkability, layer table, turn curves, efficiency");
  audit_flags.add_to(audit);
  audit->callback([&] {
    run = [&] { return cmd_audit(audit_flags, {true, true, true}, ReportFormat::Markdown); };
  });

  std::string report_in, report_format, report_out;
  auto* report = app.add_subcommand("report", "Re-render a JSON report as csv, markdown or json");
  report->add_option("--in", report_in, "Report JSON written by audit")->required();
  report->add_option("--format", report_format, "Output format")
      ->required()
      ->check(CLI::IsMember({"csv", "markdown", "md", "json"}));
  report->add_option("--output", report_out, "Output file (default: stdout)");
  report->callback([&] { run = [&] { return cmd_report(report_in, report_format, report_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    return run();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
