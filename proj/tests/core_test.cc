// tests/core_test.cc

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

#include <set>

#include "doctest.h"
#include "hsaudit/core.h"
#include "test_util.h"

using namespace hsaudit;
using hsaudit::testing::make_record;
using hsaudit::testing::random_dataset;

TEST_CASE("layer tags follow 1, round(N/2), N") {
  CHECK(LayerTag::mid(32).index == 16);
  CHECK(LayerTag::mid(20).index == 10);
  CHECK(LayerTag::mid(2).index == 1);
  CHECK(LayerTag::mid(5).index == 3);  // half rounds up
  CHECK(LayerTag::early(7).index == 1);
  CHECK(LayerTag::late(7).index == 7);
  CHECK(LayerTag::all(7).consistent());
  LayerTag bad = LayerTag::late(8);
  bad.index = 3;
  CHECK_FALSE(bad.consistent());
  CHECK(parse_layer_kind("mid") == LayerKind::Mid);
  CHECK(layer_kind_name(LayerKind::MeanPooledAll) == "all");
  CHECK_THROWS_AS(parse_layer_kind("middle"), ConfigError);
  CHECK(parse_anon_condition("w2f") == AnonCondition::W2F);
  CHECK_THROWS_AS(parse_anon_condition("w2x"), ConfigError);
}

TEST_CASE("validate_dataset reports each broken rule") {
  Dataset d = random_dataset(2, 2, 3, 4, 1);
  CHECK(validate_dataset(d).empty());

  SUBCASE("non-finite frame") {
    d.records[1].seq.frames(0, 2) = std::numeric_limits<double>::quiet_NaN();
    const auto v = validate_dataset(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].utterance_id == d.records[1].utterance_id);
  }
  SUBCASE("duplicate id") {
    d.records[2].utterance_id = d.records[0].utterance_id;
    const auto v = validate_dataset(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].message.find("duplicate") != std::string::npos);
  }
  SUBCASE("same id on another layer is fine") {
    UtteranceRecord r = d.records[0];
    r.layer = LayerTag::late(4);
    d.records.push_back(r);
    CHECK(validate_dataset(d).empty());
  }
  SUBCASE("turn index zero") {
    d.records[0].turn_index = 0;
    CHECK(validate_dataset(d).size() == 1);
  }
  SUBCASE("mixed dimension within a layer") {
    d.records[3].seq.frames = Matrix::Zero(3, 5);
    CHECK(validate_dataset(d).size() == 1);
  }
  SUBCASE("empty frames and bad rate") {
    d.records[0].seq.frames.resize(0, 4);
    d.records[1].seq.frame_rate_hz = 0;
    CHECK(validate_dataset(d).size() == 2);
  }
  SUBCASE("inconsistent layer tag") {
    d.records[0].layer.index = 2;
    CHECK(validate_dataset(d).size() == 1);
  }
}

TEST_CASE("split_speakers is speaker-disjoint, complete and deterministic") {
  const Dataset d = random_dataset(10, 2, 1, 2, 3);
  const auto [train, test] = split_speakers(d, 0.6, 7);
  const auto a = speakers_of(train), b = speakers_of(test);
  CHECK(a.size() == 6);
  CHECK(b.size() == 4);
  std::set<std::string> all(a.begin(), a.end());
  for (const auto& s : b) CHECK(all.insert(s).second);
  CHECK(all.size() == 10);
  CHECK(train.split == Split::AttackerTrain);
  CHECK(test.split == Split::Trial);
  CHECK(train.records.size() + test.records.size() == d.records.size());

  const auto again = split_speakers(d, 0.6, 7);
  CHECK(speakers_of(again.first) == a);
  CHECK(speakers_of(split_speakers(d, 0.6, 8).first).size() == 6);

  CHECK_THROWS_WITH_AS(split_speakers(random_dataset(3, 2, 1, 2, 3), 0.5, 1),
                       doctest::Contains("insufficient speakers"), DataError);
  CHECK_THROWS_AS(split_speakers(d, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_speakers(d, 1.0, 1), ConfigError);
}

TEST_CASE("split_speakers keeps at least one speaker per side") {
  const Dataset d = random_dataset(4, 1, 1, 2, 3);
  CHECK(speakers_of(split_speakers(d, 0.01, 1).first).size() == 1);
  CHECK(speakers_of(split_speakers(d, 0.99, 1).second).size() == 1);
}

TEST_CASE("enroll/trial alternation and trial design") {
  const Dataset d = random_dataset(3, 4, 2, 2, 5);
  const auto [enroll, test] = split_enroll_trial(d);
  CHECK(enroll.records.size() == 6);
  CHECK(test.records.size() == 6);
  CHECK(enroll.records[0].utterance_id == "s0-u0");
  CHECK(test.records[0].utterance_id == "s0-u1");

  const TrialList t = make_trials(enroll, test);
  CHECK(t.trials.size() == 36);
  std::size_t mated = 0;
  for (const auto& tr : t.trials) {
    CHECK(tr.enroll_id != tr.test_id);
    mated += tr.is_mated;
  }
  CHECK(mated == 12);

  const Dataset one = random_dataset(1, 4, 2, 2, 5);
  const auto [e1, t1] = split_enroll_trial(one);
  CHECK_THROWS_AS(make_trials(e1, t1), DataError);
}

TEST_CASE("select_layer and layers_of") {
  Dataset d = random_dataset(2, 2, 1, 2, 1, LayerTag::early(6));
  const Dataset late = random_dataset(2, 2, 1, 2, 2, LayerTag::late(6));
  d.records.insert(d.records.end(), late.records.begin(), late.records.end());
  const auto tags = layers_of(d);
  REQUIRE(tags.size() == 2);
  CHECK(select_layer(d, LayerTag::late(6)).records.size() == 4);
  CHECK(select_layer(d, LayerTag::mid(6)).records.empty());
}

TEST_CASE("score set invariants") {
  CHECK_NOTHROW(check_score_set({{1.0}, {0.0}}));
  CHECK_THROWS_AS(check_score_set({{}, {0.0}}), DataError);
  CHECK_THROWS_AS(check_score_set({{1.0}, {}}), DataError);
  CHECK_THROWS_AS(check_score_set({{std::numeric_limits<double>::infinity()}, {0.0}}), DataError);
}
