// src/formats.cc

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

#include "hsaudit/formats.h"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hsaudit {

namespace {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os_) throw DataError("write failed after " + std::to_string(count_) + " bytes");
    count_ += n;
  }
  template <typename T>
  void uint(T v) {
    std::array<unsigned char, sizeof(T)> b;
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b.data(), b.size());
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max())
      throw DataError("string too long for dump");
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::uint64_t count() const { return count_; }

 private:
  std::ostream& os_;
  std::uint64_t count_ = 0;
};

class LeReader {
 public:
  explicit LeReader(std::istream& is) : is_(is) {}

  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(is_.gcount());
    if (got != n) throw DataError("truncated at byte " + std::to_string(offset_ + got));
    offset_ += n;
  }
  template <typename T>
  T uint() {
    std::array<unsigned char, sizeof(T)> b;
    bytes(b.data(), b.size());
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    // Grow in bounded chunks so a corrupt length cannot force a huge allocation.
    std::string s;
    constexpr std::size_t kChunk = 1 << 16;
    while (s.size() < n) {
      const std::size_t take = std::min<std::size_t>(kChunk, n - s.size());
      const std::size_t old = s.size();
      s.resize(old + take);
      bytes(s.data() + old, take);
    }
    return s;
  }
  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }
  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::uint64_t write_dump(const std::vector<UtteranceRecord>& records, std::ostream& sink) {
  DumpHeader h;
  h.record_count = records.size();
  if (!records.empty()) {
    const auto& first = records.front();
    h.dim = static_cast<std::uint32_t>(first.seq.dim());
    h.n_layers = static_cast<std::uint16_t>(first.layer.n_layers);
    h.frame_rate_milli_hz =
        static_cast<std::uint32_t>(std::llround(first.seq.frame_rate_hz * 1000.0));
  }
  for (const auto& r : records) {
    if (r.seq.dim() != static_cast<Eigen::Index>(h.dim))
      throw DataError("non-uniform dimension: record '" + r.utterance_id + "' has " +
                      std::to_string(r.seq.dim()) + ", expected " + std::to_string(h.dim));
    if (r.seq.num_frames() < 1 || r.seq.dim() < 1)
      throw DataError("empty frame sequence in record '" + r.utterance_id + "'");
    if (std::llround(r.seq.frame_rate_hz * 1000.0) != h.frame_rate_milli_hz)
      throw DataError("non-uniform frame rate in record '" + r.utterance_id + "'");
    if (!r.seq.frames.allFinite())
      throw DataError("non-finite frame value in record '" + r.utterance_id + "'");
    if (r.seq.frames.cwiseAbs().maxCoeff() > std::numeric_limits<float>::max())
      throw DataError("frame value overflows float32 in record '" + r.utterance_id + "'");
  }

  LeWriter w(sink);
  w.bytes(kDumpMagic, sizeof(kDumpMagic));
  w.uint(h.version);
  w.uint(h.n_layers);
  w.uint(h.dim);
  w.uint(h.frame_rate_milli_hz);
  w.uint(h.record_count);
  w.uint(std::uint32_t{0});
  for (const auto& r : records) {
    w.str(r.utterance_id);
    w.str(r.speaker_id);
    w.uint(r.turn_index);
    w.uint(static_cast<std::uint8_t>(r.layer.kind));
    w.uint(static_cast<std::uint16_t>(r.layer.index));
    w.uint(static_cast<std::uint16_t>(r.layer.n_layers));
    w.uint(static_cast<std::uint32_t>(r.seq.num_frames()));
    const auto& f = r.seq.frames;
    for (Eigen::Index t = 0; t < f.rows(); ++t)
      for (Eigen::Index c = 0; c < f.cols(); ++c) w.f32(static_cast<float>(f(t, c)));
  }
  return w.count();
}

namespace {

DumpHeader read_header(LeReader& r) {
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kDumpMagic, sizeof(magic)) != 0) throw DataError("not a dump file");
  DumpHeader h;
  h.version = r.uint<std::uint16_t>();
  if (h.version != kDumpVersion)
    throw DataError("unsupported version " + std::to_string(h.version));
  h.n_layers = r.uint<std::uint16_t>();
  h.dim = r.uint<std::uint32_t>();
  h.frame_rate_milli_hz = r.uint<std::uint32_t>();
  h.record_count = r.uint<std::uint64_t>();
  r.uint<std::uint32_t>();  // reserved
  if (h.record_count > 0 && h.dim == 0) throw DataError("dump header has dim 0");
  if (h.record_count > 0 && h.frame_rate_milli_hz == 0)
    throw DataError("dump header has frame rate 0");
  return h;
}

}  // namespace

DumpHeader read_dump_header(std::istream& source) {
  LeReader r(source);
  return read_header(r);
}

std::vector<UtteranceRecord> read_dump(std::istream& source) {
  LeReader r(source);
  const DumpHeader h = read_header(r);
  std::vector<UtteranceRecord> out;
  const double rate = h.frame_rate_milli_hz / 1000.0;
  for (std::uint64_t i = 0; i < h.record_count; ++i) {
    UtteranceRecord rec;
    rec.utterance_id = r.str();
    rec.speaker_id = r.str();
    rec.turn_index = r.uint<std::uint32_t>();
    const auto kind = r.uint<std::uint8_t>();
    if (kind > 3)
      throw DataError("record " + std::to_string(i) + ": invalid layer kind " +
                      std::to_string(kind) + " at byte " + std::to_string(r.offset() - 1));
    rec.layer.kind = static_cast<LayerKind>(kind);
    rec.layer.index = r.uint<std::uint16_t>();
    rec.layer.n_layers = r.uint<std::uint16_t>();
    const auto frames = r.uint<std::uint32_t>();
    if (frames == 0) throw DataError("record " + std::to_string(i) + " has zero frames");

    // Grow only as values arrive: a corrupt T or dim fails on truncation
    // instead of allocating up front.
    std::vector<float> buf;
    const std::uint64_t count = std::uint64_t{frames} * h.dim;
    for (std::uint64_t v = 0; v < count; ++v) buf.push_back(r.f32());
    rec.seq.frame_rate_hz = rate;
    rec.seq.frames.resize(frames, h.dim);
    for (std::uint32_t t = 0; t < frames; ++t)
      for (std::uint32_t c = 0; c < h.dim; ++c)
        rec.seq.frames(t, c) = static_cast<double>(buf[std::size_t{t} * h.dim + c]);
    out.push_back(std::move(rec));
  }
  if (!r.at_eof())
    throw DataError("trailing bytes after " + std::to_string(h.record_count) +
                    " records at byte " + std::to_string(r.offset()));
  return out;
}

std::vector<UtteranceRecord> read_dump_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dump '" + path + "'");
  try {
    return read_dump(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::uint64_t write_dump_file(const std::vector<UtteranceRecord>& records,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dump '" + path + "'");
  return write_dump(records, out);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

bool skippable(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

TrialList parse_trials(std::istream& text) {
  TrialList out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(text, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto f = split_ws(line);
    if (f.size() != 3 || (f[2] != "target" && f[2] != "nontarget"))
      throw DataError("trials line " + std::to_string(lineno) +
                      ": expected '<enroll_id> <test_id> <target|nontarget>'");
    if (f[0] == f[1])
      throw DataError("trials line " + std::to_string(lineno) + ": self-trial '" + f[0] + "'");
    out.trials.push_back({f[0], f[1], f[2] == "target"});
  }
  if (out.trials.empty()) throw DataError("zero trials");
  return out;
}

void write_trials(const TrialList& trials, std::ostream& sink) {
  for (const auto& t : trials.trials)
    sink << t.enroll_id << ' ' << t.test_id << ' ' << (t.is_mated ? "target" : "nontarget")
         << '\n';
}

std::string format_shortest(double v) {
  std::array<char, 32> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_scores(const ScoreSet& s, std::ostream& sink) {
  check_score_set(s);
  for (double v : s.mated) sink << "mated " << format_shortest(v) << '\n';
  for (double v : s.non_mated) sink << "nonmated " << format_shortest(v) << '\n';
}

ScoreSet read_scores(std::istream& source) {
  ScoreSet s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(source, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto f = split_ws(line);
    const auto bad = [&](const std::string& what) {
      return DataError("scores line " + std::to_string(lineno) + ": " + what);
    };
    if (f.size() != 2) throw bad("expected '<mated|nonmated> <score>'");
    double v = 0;
    const auto* first = f[1].data();
    const auto* last = first + f[1].size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
      throw bad("unparseable score '" + f[1] + "'");
    if (f[0] == "mated")
      s.mated.push_back(v);
    else if (f[0] == "nonmated")
      s.non_mated.push_back(v);
    else
      throw bad("unknown label '" + f[0] + "'");
  }
  check_score_set(s);
  return s;
}

}  // namespace hsaudit
