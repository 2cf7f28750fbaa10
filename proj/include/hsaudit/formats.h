// include/hsaudit/formats.h

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

#ifndef HSAUDIT_FORMATS_H_
#define HSAUDIT_FORMATS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hsaudit/core.h"

namespace hsaudit {

/*
  Hidden-state dump (.hsd), all integers little-endian, no padding.

  header (32 bytes)
    char[8]  magic "HSDUMP01"
    u16      version (= 1)
    u16      n_layers
    u32      dim
    u32      frame_rate_milli_hz
    u64      record_count
    u32      reserved (= 0)

  record (repeated record_count times)
    u32 len, bytes   utterance_id (UTF-8)
    u32 len, bytes   speaker_id (UTF-8)
    u32              turn_index
    u8               layer kind (0 early, 1 mid, 2 late, 3 all)
    u16              layer index
    u16              layer n_layers
    u32              T
    f32[T * dim]     frames, row-major

  The header's n_layers and frame rate come from the first record; a dump
  with zero records has n_layers = 0, dim = 0 and rate 0.
*/

inline constexpr char kDumpMagic[8] = {'H', 'S', 'D', 'U', 'M', 'P', '0', '1'};
inline constexpr std::uint16_t kDumpVersion = 1;
inline constexpr std::size_t kDumpHeaderSize = 32;

struct DumpHeader {
  std::uint16_t version = kDumpVersion;
  std::uint16_t n_layers = 0;
  std::uint32_t dim = 0;
  std::uint32_t frame_rate_milli_hz = 0;
  std::uint64_t record_count = 0;
};

/// Writes records; returns the number of bytes written.  Frames are stored
/// as 32-bit floats, so values are rounded on the way out.
std::uint64_t write_dump(const std::vector<UtteranceRecord>& records, std::ostream& sink);
std::vector<UtteranceRecord> read_dump(std::istream& source);
DumpHeader read_dump_header(std::istream& source);

std::vector<UtteranceRecord> read_dump_file(const std::string& path);
std::uint64_t write_dump_file(const std::vector<UtteranceRecord>& records,
                              const std::string& path);

/// Lines of "<enroll_id> <test_id> <target|nontarget>"; blank lines and lines
/// starting with '#' are skipped.
TrialList parse_trials(std::istream& text);
void write_trials(const TrialList& trials, std::ostream& sink);

/// Lines of "<mated|nonmated> <score>", score in shortest round-trip form.
void write_scores(const ScoreSet& s, std::ostream& sink);
ScoreSet read_scores(std::istream& source);

/// Shortest decimal string that parses back to exactly v.
std::string format_shortest(double v);

}  // namespace hsaudit

#endif  // HSAUDIT_FORMATS_H_
