#include "ccdet/types.hpp"

#include "ccdet/rng.hpp"

namespace ccdet {

std::string to_string(ResourceKind k) {
  switch (k) {
    case ResourceKind::cpu: return "cpu";
    case ResourceKind::cache: return "cache";
    case ResourceKind::membus: return "membus";
  }
  throw std::logic_error("unreachable resource kind");
}

std::string to_string(TraceLabel l) {
  return l == TraceLabel::overt ? "overt" : "covert";
}

ResourceKind resource_kind_from_string(const std::string& s) {
  if (s == "cpu") return ResourceKind::cpu;
  if (s == "cache") return ResourceKind::cache;
  if (s == "membus") return ResourceKind::membus;
  throw std::invalid_argument("unknown resource kind: '" + s + "'");
}

TraceLabel trace_label_from_string(const std::string& s) {
  if (s == "overt") return TraceLabel::overt;
  if (s == "covert") return TraceLabel::covert;
  throw std::invalid_argument("unknown trace label: '" + s + "'");
}

BitStream BitStream::random(std::size_t n, std::uint64_t seed) {
  BitStream bs;
  bs.bits.reserve(n);
  auto rng = make_engine(seed);
  for (std::size_t i = 0; i < n; ++i)
    bs.bits.push_back(static_cast<std::uint8_t>(rng() & 1u));
  return bs;
}

void Trace::validate() const {
  if (label == TraceLabel::covert && !channel.has_value())
    throw std::invalid_argument("covert trace is missing its channel tag");
  if (label == TraceLabel::overt && channel.has_value())
    throw std::invalid_argument("overt trace must not carry a channel tag");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.timestamp_ms < 0)
      throw std::invalid_argument("sample " + std::to_string(i) + ": negative timestamp");
    if (i > 0 && s.timestamp_ms <= samples[i - 1].timestamp_ms)
      throw std::invalid_argument("sample " + std::to_string(i) +
                                  ": timestamps must be strictly increasing");
    if (s.usage < 0.0 || s.usage > 100.0)
      throw std::invalid_argument("sample " + std::to_string(i) + ": usage outside [0,100]");
    if (s.latency_us < 0.0)
      throw std::invalid_argument("sample " + std::to_string(i) + ": negative latency");
  }
}

}  // namespace ccdet
