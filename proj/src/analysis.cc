// src/analysis.cc

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

#include "hsaudit/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace hsaudit {

LayerSelection layer_select(int n_layers) {
  if (n_layers < 2) throw ConfigError("layer selection needs N >= 2");
  return {1, mid_layer_index(n_layers), n_layers};
}

FrameSequence mean_pool_layers(const std::vector<FrameSequence>& per_layer) {
  if (per_layer.empty()) throw DataError("no layers to pool");
  const auto& first = per_layer.front();
  FrameSequence out{Matrix::Zero(first.num_frames(), first.dim()), first.frame_rate_hz};
  for (const auto& s : per_layer) {
    if (s.num_frames() != first.num_frames() || s.dim() != first.dim())
      throw DataError("layer shape mismatch: " + std::to_string(s.num_frames()) + "x" +
                      std::to_string(s.dim()) + " vs " + std::to_string(first.num_frames()) +
                      "x" + std::to_string(first.dim()));
    out.frames += s.frames;
  }
  out.frames /= static_cast<double>(per_layer.size());
  return out;
}

LayerTable build_layer_table(const std::vector<LayerRun>& runs) {
  LayerTable t;
  for (const auto& run : runs) {
    auto cell = [&](LayerKind k) {
      auto it = run.scores.find(k);
      if (it == run.scores.end())
        throw DataError("run '" + run.labels.system + "' lacks the " + layer_kind_name(k) +
                        " layer");
      return compute_eer(it->second).eer;
    };
    t.rows.push_back({run.labels, cell(LayerKind::Early), cell(LayerKind::Mid),
                      cell(LayerKind::Late), cell(LayerKind::MeanPooledAll)});
  }
  return t;
}

std::vector<DialogueSide> dialogue_sides(const Dataset& d) {
  std::vector<DialogueSide> sides;
  // (speaker, dialogue) -> position in sides
  std::map<std::pair<std::string, int>, std::size_t> where;
  std::map<std::pair<std::string, std::uint32_t>, int> occurrences;
  for (const auto& r : d.records) {
    const int dialogue = occurrences[{r.speaker_id, r.turn_index}]++;
    auto [it, inserted] = where.emplace(std::make_pair(r.speaker_id, dialogue), sides.size());
    if (inserted) sides.push_back({r.speaker_id, dialogue, {}});
    sides[it->second].turns.emplace(r.turn_index, &r);
  }
  return sides;
}

std::optional<FrameSequence> dialogue_observation(const DialogueSide& side, int n, TurnMode mode) {
  const int first = mode == TurnMode::Cumulative ? 1 : n;
  std::vector<const UtteranceRecord*> parts;
  for (int t = first; t <= n; ++t) {
    auto it = side.turns.find(static_cast<std::uint32_t>(t));
    if (it == side.turns.end()) return std::nullopt;
    parts.push_back(it->second);
  }
  Eigen::Index rows = 0;
  for (const auto* p : parts) rows += p->seq.num_frames();
  FrameSequence out{Matrix(rows, parts.front()->seq.dim()), parts.front()->seq.frame_rate_hz};
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.frames.middleRows(at, p->seq.num_frames()) = p->seq.frames;
    at += p->seq.num_frames();
  }
  return out;
}

ScoreSet dialogue_scores(const Attacker& atk, const Dataset& d, int n, TurnMode mode) {
  const PldaScorer scorer(atk.plda);
  std::vector<std::string> speakers;
  std::vector<PldaScorer::Prepared> obs;
  for (const auto& side : dialogue_sides(d)) {
    auto seq = dialogue_observation(side, n, mode);
    if (!seq) continue;
    speakers.push_back(side.speaker_id);
    obs.push_back(scorer.prepare(atk.embed(*seq)));
  }
  ScoreSet s;
  for (std::size_t i = 0; i < obs.size(); ++i)
    for (std::size_t j = i + 1; j < obs.size(); ++j)
      (speakers[i] == speakers[j] ? s.mated : s.non_mated).push_back(scorer.score(obs[i], obs[j]));
  if (s.mated.empty() || s.non_mated.empty())
    throw DataError("dialogues at " + std::to_string(n) +
                    " turns give no mated or no non-mated pairs");
  return s;
}

TurnCurve turnwise_curve(const Attacker& atk, const Dataset& d, const std::vector<int>& turn_grid,
                         const LinkabilityConfig& lnk, TurnMode mode, const std::string& label) {
  if (turn_grid.empty()) throw ConfigError("empty turn grid");
  if (layers_of(d).size() != 1) throw DataError("turn-wise analysis needs a single-layer dataset");
  for (std::size_t i = 0; i < turn_grid.size(); ++i)
    if (turn_grid[i] < 1 || (i > 0 && turn_grid[i] <= turn_grid[i - 1]))
      throw ConfigError("turn grid must be positive and strictly increasing");
  std::uint32_t max_turn = 0;
  for (const auto& r : d.records) max_turn = std::max(max_turn, r.turn_index);
  if (static_cast<std::uint32_t>(turn_grid.back()) > max_turn)
    throw DataError("turn grid reaches " + std::to_string(turn_grid.back()) +
                    " but the data has at most " + std::to_string(max_turn) + " turns");

  TurnCurve curve;
  curve.label = label;
  for (int n : turn_grid) {
    const ScoreSet s = dialogue_scores(atk, d, n, mode);
    const double d_sys = compute_linkability(s, lnk).d_sys;
    curve.points.push_back({n, privacy_score(d_sys), d_sys, s.mated.size(), s.non_mated.size()});
  }
  return curve;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + name + "' (expected csv|markdown|json)");
}

std::string sig3(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  if (std::abs(v) >= 1000.0) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%#.3g", v);
    std::string s = buf;
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
  return buf;
}

namespace {

std::string pct(double v) { return sig3(100.0 * v); }

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::string emit_csv(const Report& r) {
  std::ostringstream os;
  os << "section,system,encoder,anon,attacker,eer,linkability\n";
  for (const auto& p : r.privacy)
    os << "privacy," << p.labels.system << ',' << p.labels.encoder << ',' << p.labels.anon << ','
       << p.attacker << ',' << pct(p.eer) << ',' << sig3(p.linkability) << '\n';
  os << "\nsection,system,encoder,anon,eer_early,eer_mid,eer_late,eer_all\n";
  for (const auto& t : r.tables)
    for (const auto& row : t.rows)
      os << "layers," << row.labels.system << ',' << row.labels.encoder << ',' << row.labels.anon
         << ',' << pct(row.eer_early) << ',' << pct(row.eer_mid) << ',' << pct(row.eer_late) << ','
         << pct(row.eer_all) << '\n';
  os << "\nsection,curve,turns,privacy\n";
  for (const auto& c : r.curves)
    for (const auto& p : c.points)
      os << "turns," << c.label << ',' << p.turns << ',' << sig3(p.privacy) << '\n';
  os << "\nsection,condition,rtfx,frl_s,ttsr,int_latency_s,isr\n";
  for (const auto& e : r.efficiency)
    os << "efficiency," << e.label << ',' << sig3(e.report.rtfx) << ',' << sig3(e.report.frl_s)
       << ',' << sig3(e.report.ttsr) << ',' << sig3(e.report.int_latency_s) << ','
       << sig3(e.report.isr) << '\n';
  return os.str();
}

std::string emit_markdown(const Report& r) {
  std::ostringstream os;
  os << "# Speaker leakage report\n";
  if (!r.privacy.empty()) {
    os << "\n## Privacy\n\n"
       << "| System | Encoder | Anon. | Attacker | EER (%) | Lnk |\n"
       << "|---|---|---|---|---|---|\n";
    for (const auto& p : r.privacy)
      os << "| " << p.labels.system << " | " << p.labels.encoder << " | " << p.labels.anon
         << " | " << p.attacker << " | " << pct(p.eer) << " | " << sig3(p.linkability) << " |\n";
  }
  bool any_rows = false;
  for (const auto& t : r.tables) any_rows |= !t.rows.empty();
  if (any_rows) {
    os << "\n## Layer-wise EER (%)\n\n"
       << "| System | Encoder | Anon. | Early | Mid | Late | All |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& t : r.tables)
      for (const auto& row : t.rows)
        os << "| " << row.labels.system << " | " << row.labels.encoder << " | " << row.labels.anon
           << " | " << pct(row.eer_early) << " | " << pct(row.eer_mid) << " | "
           << pct(row.eer_late) << " | " << pct(row.eer_all) << " |\n";
  }
  if (!r.curves.empty()) {
    os << "\n## Speaker privacy (1 - Linkability) by turns\n";
    for (const auto& c : r.curves) {
      os << "\n| " << (c.label.empty() ? "curve" : c.label) << " |";
      for (const auto& p : c.points) os << ' ' << p.turns << " |";
      os << "\n|---|";
      for (std::size_t i = 0; i < c.points.size(); ++i) os << "---|";
      os << "\n| privacy |";
      for (const auto& p : c.points) os << ' ' << sig3(p.privacy) << " |";
      os << "\n";
    }
  }
  if (!r.efficiency.empty()) {
    os << "\n## Efficiency\n\n"
       << "| Condition | RTFx | FRL (s) | TTSR | Int.L. (s) | ISR |\n"
       << "|---|---|---|---|---|---|\n";
    for (const auto& e : r.efficiency)
      os << "| " << e.label << " | " << sig3(e.report.rtfx) << " | " << sig3(e.report.frl_s)
         << " | " << sig3(e.report.ttsr) << " | " << sig3(e.report.int_latency_s) << " | "
         << sig3(e.report.isr) << " |\n";
  }
  return os.str();
}

std::string emit_json(const Report& r) {
  using nlohmann::json;
  json j;
  j["schema"] = "hsaudit.report/1";
  auto labels = [](const RunLabels& l) {
    return json{{"system", l.system}, {"encoder", l.encoder}, {"anon", l.anon}};
  };
  j["privacy"] = json::array();
  for (const auto& p : r.privacy) {
    json row = labels(p.labels);
    row["attacker"] = p.attacker;
    row["eer"] = p.eer;
    row["linkability"] = p.linkability;
    j["privacy"].push_back(row);
  }
  j["layer_tables"] = json::array();
  for (const auto& t : r.tables) {
    json rows = json::array();
    for (const auto& row : t.rows) {
      json jr = labels(row.labels);
      jr["eer_early"] = row.eer_early;
      jr["eer_mid"] = row.eer_mid;
      jr["eer_late"] = row.eer_late;
      jr["eer_all"] = row.eer_all;
      rows.push_back(jr);
    }
    j["layer_tables"].push_back(rows);
  }
  j["turn_curves"] = json::array();
  for (const auto& c : r.curves) {
    json pts = json::array();
    for (const auto& p : c.points)
      pts.push_back({{"turns", p.turns},
                     {"privacy", p.privacy},
                     {"linkability", p.d_sys},
                     {"n_mated", p.n_mated},
                     {"n_non_mated", p.n_non_mated}});
    j["turn_curves"].push_back({{"label", c.label}, {"points", pts}});
  }
  j["efficiency"] = json::array();
  for (const auto& e : r.efficiency)
    j["efficiency"].push_back({{"condition", e.label},
                               {"rtfx", number_or_null(e.report.rtfx)},
                               {"frl_s", e.report.frl_s},
                               {"ttsr", e.report.ttsr},
                               {"int_latency_s", e.report.int_latency_s},
                               {"isr", e.report.isr},
                               {"audio_s", e.report.audio_s},
                               {"processing_s", e.report.processing_s},
                               {"warnings", e.report.warnings}});
  return j.dump(2) + "\n";
}

double number_or_inf(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

}  // namespace

Report parse_report_json(std::istream& source) {
  using nlohmann::json;
  Report r;
  try {
    const json j = json::parse(source);
    if (!j.is_object() || j.value("schema", "") != "hsaudit.report/1")
      throw DataError("not an hsaudit.report/1 document");
    auto labels = [](const json& x) {
      return RunLabels{x.at("system").get<std::string>(), x.at("encoder").get<std::string>(),
                       x.at("anon").get<std::string>()};
    };
    for (const auto& p : j.at("privacy"))
      r.privacy.push_back({labels(p), p.at("attacker").get<std::string>(), p.at("eer").get<double>(),
                           p.at("linkability").get<double>()});
    for (const auto& t : j.at("layer_tables")) {
      LayerTable table;
      for (const auto& row : t)
        table.rows.push_back({labels(row), row.at("eer_early").get<double>(),
                              row.at("eer_mid").get<double>(), row.at("eer_late").get<double>(),
                              row.at("eer_all").get<double>()});
      r.tables.push_back(std::move(table));
    }
    for (const auto& c : j.at("turn_curves")) {
      TurnCurve curve;
      curve.label = c.at("label").get<std::string>();
      for (const auto& p : c.at("points"))
        curve.points.push_back({p.at("turns").get<int>(), p.at("privacy").get<double>(),
                                p.at("linkability").get<double>(),
                                p.at("n_mated").get<std::size_t>(),
                                p.at("n_non_mated").get<std::size_t>()});
      r.curves.push_back(std::move(curve));
    }
    for (const auto& e : j.at("efficiency")) {
      EfficiencyRow row;
      row.label = e.at("condition").get<std::string>();
      row.report.rtfx = number_or_inf(e.at("rtfx"));
      row.report.frl_s = e.at("frl_s").get<double>();
      row.report.ttsr = e.at("ttsr").get<double>();
      row.report.int_latency_s = e.at("int_latency_s").get<double>();
      row.report.isr = e.at("isr").get<double>();
      row.report.audio_s = e.at("audio_s").get<double>();
      row.report.processing_s = e.at("processing_s").get<double>();
      row.report.warnings = e.at("warnings").get<std::vector<std::string>>();
      r.efficiency.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string emit_report(const Report& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return emit_csv(report);
    case ReportFormat::Markdown: return emit_markdown(report);
    case ReportFormat::Json: return emit_json(report);
  }
  throw ConfigError("unknown report format");
}

}  // namespace hsaudit
