#pragma once

#include "ccdet/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace ccdet {

// Trace files are line-oriented UTF-8 text with LF endings: one metadata
// line, then one row per sample with the columns
// timestamp_ms,process_id,resource_kind,usage_pct,latency_us:
//
//   # label=<overt|covert> channel=<cpu|cache|membus|-> seed=<u64>
//   1000,vm-7,cpu,63.25,0
//   ...
//
// A trace with no samples serializes to just the metadata line. Doubles are
// written in shortest round-trip form, so write_trace(read_trace(p))
// reproduces the file byte for byte.

Trace read_trace(const std::filesystem::path& path);
Trace read_trace(std::istream& in, const std::string& name = "<stream>");

void write_trace(const Trace& trace, const std::filesystem::path& path);
void write_trace(const Trace& trace, std::ostream& out);

std::string trace_to_string(const Trace& trace);

}  // namespace ccdet
