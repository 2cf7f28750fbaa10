// tests/analysis_test.cc

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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hsaudit/analysis.h"
#include "hsaudit/synth.h"
#include "test_util.h"

using namespace hsaudit;
using hsaudit::testing::gaussian_scores;

namespace {

Report sample_report() {
  Report r;
  r.privacy.push_back({{"Moshi", "discrete", "none"}, "on-clean", 0.0676, 0.821});
  r.privacy.push_back({{"SALM-Duplex", "discrete", "W2F"}, "lazy-informed", 0.493, 0.0112});
  LayerTable t;
  t.rows.push_back({{"SALM-Duplex", "continuous", "none"}, 0.255, 0.29, 0.329, 0.291});
  r.tables.push_back(t);
  r.curves.push_back({"none", {{1, 0.337, 0.663, 10, 20}, {3, 0.084, 0.916, 10, 20}}});
  EfficiencyReport e;
  e.rtfx = 235.1234;
  e.frl_s = 0.488;
  e.ttsr = 1.0;
  e.int_latency_s = 0.5;
  e.isr = 0.9;
  r.efficiency.push_back({"none", e});
  e.rtfx = std::numeric_limits<double>::infinity();
  e.warnings = {"zero processing time; RTFx is unbounded"};
  r.efficiency.push_back({"free", e});
  return r;
}

struct Fixture {
  SynthConfig cfg;
  Attacker atk;
  Dataset dialogues;

  Fixture() {
    cfg.layers = {LayerKind::MeanPooledAll};
    SynthConfig train_cfg = cfg;
    train_cfg.n_speakers = 48;
    train_cfg.speaker_prefix = "trn";
    atk = train_attacker(gen_population(train_cfg, Split::AttackerTrain), {});
    SynthConfig d = cfg;
    d.n_speakers = 6;
    d.utts_per_speaker = 30;  // three dialogues of ten turns
    dialogues = gen_population(d);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("layer selection") {
  CHECK(layer_select(2).mid == 1);
  CHECK(layer_select(8).mid == 4);
  CHECK(layer_select(20).mid == 10);
  CHECK(layer_select(32).late == 32);
  CHECK(layer_select(5).mid == 3);
  CHECK_THROWS_AS(layer_select(1), ConfigError);
}

TEST_CASE("mean pooling over layers") {
  Matrix a(1, 2), b(1, 2);
  a << 1, 2;
  b << 3, 6;
  CHECK(mean_pool_layers({{a, 12.5}, {b, 12.5}}).frames == (Matrix(1, 2) << 2, 4).finished());

  Rng rng(3);
  std::vector<FrameSequence> x, y, mix;
  for (int i = 0; i < 4; ++i) {
    x.push_back({rng.normal_matrix(5, 3), 12.5});
    y.push_back({rng.normal_matrix(5, 3), 12.5});
    mix.push_back({2.0 * x.back().frames - y.back().frames, 12.5});
  }
  const Matrix lhs = mean_pool_layers(mix).frames;
  const Matrix rhs = 2.0 * mean_pool_layers(x).frames - mean_pool_layers(y).frames;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(mean_pool_layers({}), DataError);
  CHECK_THROWS_AS(mean_pool_layers({{a, 12.5}, {Matrix(2, 2), 12.5}}), DataError);
}

TEST_CASE("layer table") {
  LayerRun run{{"S", "E", "none"}, {}};
  const ScoreSet same{{0.5, 0.5}, {0.5, 0.5}};
  for (auto k : {LayerKind::Early, LayerKind::Mid, LayerKind::Late, LayerKind::MeanPooledAll})
    run.scores[k] = same;
  const LayerTable t = build_layer_table({run});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].eer_early == 0.5);
  CHECK(t.rows[0].eer_all == 0.5);
  run.scores.erase(LayerKind::Late);
  CHECK_THROWS_WITH_AS(build_layer_table({run}), doctest::Contains("late"), DataError);
}

TEST_CASE("sig3") {
  CHECK(sig3(24.6) == "24.6");
  CHECK(sig3(0.391) == "0.391");
  CHECK(sig3(235.0) == "235");
  CHECK(sig3(238.095) == "238");
  CHECK(sig3(0.1) == "0.100");
  CHECK(sig3(5) == "5.00");
  CHECK(sig3(1234.4) == "1234");
  CHECK(sig3(0.0112345) == "0.0112");
  CHECK(sig3(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(sig3(std::nan("")) == "nan");
}

TEST_CASE("empty reports are valid in every format") {
  const Report empty;
  CHECK(emit_report(empty, ReportFormat::Markdown).starts_with("# "));
  const std::string csv = emit_report(empty, ReportFormat::Csv);
  CHECK(csv.find("section,system,encoder,anon,attacker,eer,linkability") != std::string::npos);
  std::istringstream js(emit_report(empty, ReportFormat::Json));
  const Report back = parse_report_json(js);
  CHECK(back.privacy.empty());
  CHECK(back.curves.empty());
}

TEST_CASE("report content") {
  const Report r = sample_report();
  const std::string md = emit_report(r, ReportFormat::Markdown);
  CHECK(md.find("| System | Encoder | Anon. | Early | Mid | Late | All |") != std::string::npos);
  CHECK(md.find("| SALM-Duplex | continuous | none | 25.5 | 29.0 | 32.9 | 29.1 |") != std::string::npos);
  CHECK(md.find("| Moshi | discrete | none | on-clean | 6.76 | 0.821 |") != std::string::npos);
  CHECK(md.find("| none | 235 | 0.488 |") != std::string::npos);
  CHECK(md.find("\n\n\n") == std::string::npos);

  const std::string csv = emit_report(r, ReportFormat::Csv);
  CHECK(csv.find("privacy,SALM-Duplex,discrete,W2F,lazy-informed,49.3,0.0112\n") != std::string::npos);
  CHECK(csv.find("turns,none,3,0.0840\n") != std::string::npos);
  CHECK(csv.find("efficiency,free,inf,") != std::string::npos);

  for (auto f : {ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Json})
    CHECK(emit_report(r, f) == emit_report(r, f));
  CHECK(parse_report_format("md") == ReportFormat::Markdown);
  CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
}

TEST_CASE("json report round trip") {
  const Report r = sample_report();
  const std::string text = emit_report(r, ReportFormat::Json);
  CHECK(text.find("\"hsaudit.report/1\"") != std::string::npos);
  std::istringstream in(text);
  const Report back = parse_report_json(in);
  for (auto f : {ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Json})
    CHECK(emit_report(back, f) == emit_report(r, f));
  CHECK(std::isinf(back.efficiency[1].report.rtfx));
  CHECK(back.curves[0].points[1].n_non_mated == 20);

  std::istringstream bad("{\"schema\": \"other\"}");
  CHECK_THROWS_AS(parse_report_json(bad), DataError);
  std::istringstream junk("{not json");
  CHECK_THROWS_AS(parse_report_json(junk), DataError);
}

TEST_CASE("dialogue grouping") {
  const auto sides = dialogue_sides(fixture().dialogues);
  CHECK(sides.size() == 18);
  for (const auto& s : sides) CHECK(s.turns.size() == 10);
  CHECK(sides[1].speaker_id == sides[0].speaker_id);
  CHECK(sides[1].dialogue == 1);
  CHECK(sides[1].turns.at(1)->utterance_id == "spk0000-u010");

  const auto cum = dialogue_observation(sides[0], 3, TurnMode::Cumulative);
  const auto one = dialogue_observation(sides[0], 3, TurnMode::PerTurn);
  REQUIRE(cum);
  REQUIRE(one);
  CHECK(cum->num_frames() == 75);
  CHECK(one->frames == sides[0].turns.at(3)->seq.frames);
  CHECK(cum->frames.bottomRows(25) == one->frames);
  CHECK_FALSE(dialogue_observation(sides[0], 11, TurnMode::Cumulative));
}

TEST_CASE("turn-wise scores agree with direct concatenation") {
  const Fixture& f = fixture();
  const int n = 3;
  // All dialogue pairs, built by hand from the records.
  std::vector<std::pair<std::string, Vector>> obs;
  for (int s = 0; s < 6; ++s)
    for (int dlg = 0; dlg < 3; ++dlg) {
      Matrix frames(25 * n, 32);
      for (int t = 0; t < n; ++t)
        frames.middleRows(25 * t, 25) = f.dialogues.records[s * 30 + dlg * 10 + t].seq.frames;
      obs.emplace_back(f.dialogues.records[s * 30].speaker_id, f.atk.embed({frames, 12.5}));
    }
  ScoreSet expected;
  for (std::size_t i = 0; i < obs.size(); ++i)
    for (std::size_t j = i + 1; j < obs.size(); ++j)
      (obs[i].first == obs[j].first ? expected.mated : expected.non_mated)
          .push_back(score_trial(f.atk.plda, obs[i].second, obs[j].second));
  const ScoreSet got = dialogue_scores(f.atk, f.dialogues, n, TurnMode::Cumulative);
  REQUIRE(got.mated.size() == 18);  // 6 speakers x 3 pairs
  REQUIRE(got.non_mated.size() == expected.non_mated.size());
  for (std::size_t i = 0; i < got.mated.size(); ++i)
    CHECK(got.mated[i] == doctest::Approx(expected.mated[i]).epsilon(1e-9));
  for (std::size_t i = 0; i < got.non_mated.size(); ++i)
    CHECK(got.non_mated[i] == doctest::Approx(expected.non_mated[i]).epsilon(1e-9));

  const TurnCurve c = turnwise_curve(f.atk, f.dialogues, {1, 3}, {}, TurnMode::Cumulative, "x");
  REQUIRE(c.points.size() == 2);
  CHECK(c.label == "x");
  CHECK(c.points[1].d_sys == doctest::Approx(compute_linkability(expected).d_sys).epsilon(1e-9));
  CHECK(c.points[1].privacy == doctest::Approx(1.0 - c.points[1].d_sys));
}

TEST_CASE("turn grid validation") {
  const Fixture& f = fixture();
  CHECK_THROWS_AS(turnwise_curve(f.atk, f.dialogues, {}), ConfigError);
  CHECK_THROWS_AS(turnwise_curve(f.atk, f.dialogues, {3, 2}), ConfigError);
  CHECK_THROWS_AS(turnwise_curve(f.atk, f.dialogues, {0, 1}), ConfigError);
  CHECK_THROWS_WITH_AS(turnwise_curve(f.atk, f.dialogues, {1, 12}), doctest::Contains("at most 10"), DataError);
  Dataset single = f.dialogues;
  single.records.resize(10);  // one dialogue: no mated pairs
  CHECK_THROWS_AS(dialogue_scores(f.atk, single, 1, TurnMode::Cumulative), DataError);
}
