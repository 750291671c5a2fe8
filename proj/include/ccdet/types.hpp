#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccdet {

enum class ResourceKind { cpu, cache, membus };
enum class TraceLabel { overt, covert };

std::string to_string(ResourceKind k);
std::string to_string(TraceLabel l);
ResourceKind resource_kind_from_string(const std::string& s);
TraceLabel trace_label_from_string(const std::string& s);

/// One timestamped observation of a process's resource use. Latency is only
/// meaningful for cache/membus observations; cpu rows carry zero.
struct ResourceSample {
  std::int64_t timestamp_ms = 0;  // milliseconds since trace start
  std::string process_id;
  ResourceKind kind = ResourceKind::cpu;
  double usage = 0.0;       // percent of resource, [0, 100]
  double latency_us = 0.0;  // access latency, >= 0

  bool operator==(const ResourceSample&) const = default;
};

/// Secret payload carried by a simulated sender; ground truth for decoders.
struct BitStream {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool empty() const { return bits.empty(); }
  bool operator==(const BitStream&) const = default;

  static BitStream random(std::size_t n, std::uint64_t seed);
};

/// A labeled observation stream. Covert traces carry the channel they were
/// generated on; overt traces do not.
struct Trace {
  std::vector<ResourceSample> samples;
  TraceLabel label = TraceLabel::overt;
  std::optional<ResourceKind> channel;
  std::uint64_t seed = 0;

  bool operator==(const Trace&) const = default;

  /// Throws if the label/channel pairing or sample ordering is invalid.
  void validate() const;
};

/// One classifier data point: block-level distribution-shift score, the
/// point's normalized inter-arrival interval, and the resource-usage context.
struct SignatureRecord {
  double alpha = 0.0;    // distribution score, [0, 1]
  double beta = 0.0;     // z-scored interval
  double context = 0.0;  // usage percent, [0, 100]
  TraceLabel label = TraceLabel::overt;

  bool operator==(const SignatureRecord&) const = default;
};

inline Eigen::Vector3d to_feature(const SignatureRecord& r) {
  return {r.alpha, r.beta, r.context};
}

/// A fixed-size chunk of consecutive records sharing one alpha; the unit of
/// detection. Only the final block of a trace may be short.
struct Block {
  std::vector<SignatureRecord> records;
  std::size_t block_size = 0;  // nominal size the trace was chunked with
};

}  // namespace ccdet
