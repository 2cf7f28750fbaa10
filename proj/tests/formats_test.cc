// tests/formats_test.cc

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

#include <bit>
#include <sstream>

#include "doctest.h"
#include "hsaudit/formats.h"
#include "test_util.h"

using namespace hsaudit;
using hsaudit::testing::make_record;

namespace {

// Independent little-endian encoder for the documented layout.
struct Bytes {
  std::string s;
  void u(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void str(const std::string& x) {
    u(x.size(), 4);
    s += x;
  }
  void f32(double v) { u(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4); }
};

std::string dump_bytes(const std::vector<UtteranceRecord>& records) {
  std::ostringstream os;
  write_dump(records, os);
  return os.str();
}

std::vector<UtteranceRecord> read_bytes(const std::string& bytes) {
  std::istringstream is(bytes);
  return read_dump(is);
}

UtteranceRecord example_record() {
  Matrix f(2, 3);
  f << 1, 2, 3, -0.5, 0.25, 1e-3;
  return make_record("spk1-u001", "spk1", f, LayerTag::mid(20), 4);
}

}  // namespace

TEST_CASE("dump layout matches the documented byte format") {
  const UtteranceRecord r = example_record();
  Bytes b;
  b.s = "HSDUMP01";
  b.u(1, 2);       // version
  b.u(20, 2);      // n_layers
  b.u(3, 4);       // dim
  b.u(12500, 4);   // 12.5 Hz in milli-hertz
  b.u(1, 8);       // record count
  b.u(0, 4);       // reserved
  CHECK(b.s.size() == 32);
  b.str("spk1-u001");
  b.str("spk1");
  b.u(4, 4);
  b.u(1, 1);   // mid
  b.u(10, 2);
  b.u(20, 2);
  b.u(2, 4);
  for (int t = 0; t < 2; ++t)
    for (int d = 0; d < 3; ++d) b.f32(r.seq.frames(t, d));

  std::ostringstream os;
  const auto n = write_dump({r}, os);
  CHECK(os.str() == b.s);
  CHECK(n == b.s.size());
}

TEST_CASE("dump round trip") {
  const UtteranceRecord r = example_record();
  const auto back = read_bytes(dump_bytes({r}));
  REQUIRE(back.size() == 1);
  CHECK(back[0].utterance_id == r.utterance_id);
  CHECK(back[0].speaker_id == r.speaker_id);
  CHECK(back[0].turn_index == 4);
  CHECK(back[0].layer == r.layer);
  CHECK(back[0].seq.frame_rate_hz == 12.5);
  CHECK(back[0].seq.frames == r.seq.frames.cast<float>().cast<double>());
  // A second pass is exact: values are already float32.
  CHECK(dump_bytes(back) == dump_bytes({r}));
}

TEST_CASE("empty dump is a bare header") {
  const std::string bytes = dump_bytes({});
  CHECK(bytes.size() == 32);
  std::istringstream is(bytes);
  CHECK(read_dump_header(is).record_count == 0);
  CHECK(read_bytes(bytes).empty());
}

TEST_CASE("write_dump preconditions") {
  std::vector<UtteranceRecord> rs = {make_record("a", "s", Matrix::Zero(1, 3)),
                                     make_record("b", "s", Matrix::Zero(1, 4))};
  std::ostringstream os;
  CHECK_THROWS_WITH_AS(write_dump(rs, os), doctest::Contains("non-uniform dimension"), DataError);
  rs[1].seq.frames = Matrix::Zero(1, 3);
  rs[1].seq.frames(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(write_dump(rs, os), doctest::Contains("non-finite"), DataError);
  rs[1].seq.frames(0, 0) = 1e300;
  CHECK_THROWS_WITH_AS(write_dump(rs, os), doctest::Contains("float32"), DataError);
}

TEST_CASE("read_dump errors") {
  const std::string good = dump_bytes({example_record()});
  CHECK_THROWS_WITH_AS(read_bytes("XXXXXXXX" + good.substr(8)), "not a dump file", DataError);

  std::string v2 = good;
  v2[8] = 2;
  CHECK_THROWS_WITH_AS(read_bytes(v2), doctest::Contains("unsupported version"), DataError);

  std::string two = good;
  two[20] = 2;  // record_count = 2, one record present
  const std::string where = "truncated at byte " + std::to_string(good.size());
  CHECK_THROWS_WITH_AS(read_bytes(two), doctest::Contains(where.c_str()), DataError);
  CHECK_THROWS_WITH_AS(read_bytes(good.substr(0, 40)), doctest::Contains("truncated at byte"), DataError);
  CHECK_THROWS_WITH_AS(read_bytes(good + "x"), doctest::Contains("trailing bytes"), DataError);

  std::string huge = good;
  huge[32] = '\xff';  // utterance_id length far beyond the stream
  huge[35] = '\x7f';
  CHECK_THROWS_AS(read_bytes(huge), DataError);

  std::string wide = good;
  for (int i = 12; i < 16; ++i) wide[i] = '\xff';  // dim = 2^32 - 1
  CHECK_THROWS_WITH_AS(read_bytes(wide), doctest::Contains("truncated"), DataError);
}

TEST_CASE("random record sets round trip bit-exactly") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + static_cast<int>(rng.uniform_index(6));
    std::vector<UtteranceRecord> rs;
    const int n = static_cast<int>(rng.uniform_index(5));
    for (int i = 0; i < n; ++i) {
      const int t = 1 + static_cast<int>(rng.uniform_index(4));
      Matrix f = (rng.normal_matrix(t, dim) * 100).cast<float>().cast<double>();
      const auto kind = static_cast<LayerKind>(rng.uniform_index(4));
      rs.push_back({"u" + std::to_string(i), "s\xc3\xa9" + std::to_string(i % 2),
                    1 + static_cast<std::uint32_t>(rng.uniform_index(9)), LayerTag::of_kind(kind, 9),
                    {f, 12.5}});
    }
    const auto back = read_bytes(dump_bytes(rs));
    REQUIRE(back.size() == rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
      CHECK(back[i].utterance_id == rs[i].utterance_id);
      CHECK(back[i].speaker_id == rs[i].speaker_id);
      CHECK(back[i].layer == rs[i].layer);
      CHECK(back[i].seq.frames == rs[i].seq.frames);
    }
  }
}

TEST_CASE("trial lists") {
  std::istringstream ok("# header\n\na b target\na c nontarget\n");
  const TrialList t = parse_trials(ok);
  REQUIRE(t.trials.size() == 2);
  CHECK(t.trials[0].is_mated);
  CHECK_FALSE(t.trials[1].is_mated);

  std::istringstream bad("a b maybe\n");
  CHECK_THROWS_WITH_AS(parse_trials(bad), doctest::Contains("line 1"), DataError);
  std::istringstream bad3("a b target\n\nx y\n");
  CHECK_THROWS_WITH_AS(parse_trials(bad3), doctest::Contains("line 3"), DataError);
  std::istringstream comments("# only\n# comments\n");
  CHECK_THROWS_WITH_AS(parse_trials(comments), "zero trials", DataError);
  std::istringstream self("a a target\n");
  CHECK_THROWS_AS(parse_trials(self), DataError);

  std::ostringstream os;
  write_trials(t, os);
  std::istringstream again(os.str());
  CHECK(parse_trials(again).trials.size() == 2);
}

TEST_CASE("score files") {
  const ScoreSet s{{1.5}, {-0.5}};
  std::ostringstream os;
  write_scores(s, os);
  CHECK(os.str() == "mated 1.5\nnonmated -0.5\n");

  ScoreSet odd{{0.1, 1.0 / 3.0, 1e-310, -2.5e17}, {std::nextafter(1.0, 2.0)}};
  std::ostringstream os2;
  write_scores(odd, os2);
  std::istringstream is(os2.str());
  const ScoreSet back = read_scores(is);
  CHECK(back.mated == odd.mated);
  CHECK(back.non_mated == odd.non_mated);

  std::ostringstream sink;
  CHECK_THROWS_AS(write_scores({{}, {1.0}}, sink), DataError);
  std::istringstream bad("mated 1\nmated abc\n");
  CHECK_THROWS_WITH_AS(read_scores(bad), doctest::Contains("line 2"), DataError);
  std::istringstream label("same 1\n");
  CHECK_THROWS_AS(read_scores(label), DataError);
}

TEST_CASE("format_shortest round trips") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<int>(rng.uniform_index(40)) - 20);
    CHECK(std::stod(format_shortest(v)) == v);
  }
  CHECK(format_shortest(0.5) == "0.5");
}
