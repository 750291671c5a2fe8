#include "ccdet/trace_io.hpp"

#include <fstream>
#include <sstream>

#include "ccdet/text.hpp"

namespace ccdet {

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t line_no, const std::string& what) {
  throw std::runtime_error(name + ":" + std::to_string(line_no) + ": " + what);
}

// Pulls `key=` off the front of `field` and returns the value part.
std::string_view expect_kv(const std::string& name, std::size_t line_no, std::string_view field,
                           std::string_view key) {
  if (field.size() < key.size() + 1 || field.substr(0, key.size()) != key ||
      field[key.size()] != '=')
    fail(name, line_no, "expected '" + std::string(key) + "=<value>', got '" + std::string(field) +
                            "'");
  return field.substr(key.size() + 1);
}

}  // namespace

Trace read_trace(std::istream& in, const std::string& name) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;

  // Metadata line: "# label=<overt|covert> channel=<cpu|cache|membus|-> seed=<u64>"
  if (!std::getline(in, line)) fail(name, 1, "empty input, expected metadata line");
  ++line_no;
  if (line.rfind("# ", 0) != 0) fail(name, line_no, "metadata line must start with '# '");
  const std::string header = line.substr(2);  // keep alive: split() returns views into it
  auto fields = split(trim(header), ' ');
  if (fields.size() != 3)
    fail(name, line_no, "metadata line must have exactly label, channel and seed fields");
  trace.label = trace_label_from_string(std::string(expect_kv(name, line_no, fields[0], "label")));
  auto channel = expect_kv(name, line_no, fields[1], "channel");
  if (channel != "-") trace.channel = resource_kind_from_string(std::string(channel));
  try {
    trace.seed = parse_uint(expect_kv(name, line_no, fields[2], "seed"));
  } catch (const std::invalid_argument& e) {
    fail(name, line_no, e.what());
  }

  while (std::getline(in, line)) {
    ++line_no;
    auto row = trim(line);
    if (row.empty()) continue;  // tolerate a trailing blank line
    auto cols = split(row, ',');
    if (cols.size() != 5) fail(name, line_no, "expected 5 comma-separated columns");
    ResourceSample s;
    try {
      s.timestamp_ms = parse_int(cols[0]);
      s.process_id = std::string(cols[1]);
      s.kind = resource_kind_from_string(std::string(cols[2]));
      s.usage = parse_double(cols[3]);
      s.latency_us = parse_double(cols[4]);
    } catch (const std::invalid_argument& e) {
      fail(name, line_no, e.what());
    }
    if (s.process_id.empty()) fail(name, line_no, "process_id must be non-empty");
    trace.samples.push_back(std::move(s));
  }

  try {
    trace.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(name + ": " + e.what());
  }
  return trace;
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path.string());
  return read_trace(in, path.string());
}

void write_trace(const Trace& trace, std::ostream& out) {
  trace.validate();
  out << "# label=" << to_string(trace.label) << " channel="
      << (trace.channel ? to_string(*trace.channel) : std::string("-")) << " seed=" << trace.seed
      << "\n";
  for (const auto& s : trace.samples) {
    out << s.timestamp_ms << ',' << s.process_id << ',' << to_string(s.kind) << ','
        << format_double(s.usage) << ',' << format_double(s.latency_us) << "\n";
  }
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path.string());
  write_trace(trace, out);
  if (!out) throw std::runtime_error("failed while writing trace file: " + path.string());
}

std::string trace_to_string(const Trace& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return out.str();
}

}  // namespace ccdet
