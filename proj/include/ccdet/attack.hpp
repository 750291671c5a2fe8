#pragma once

#include "ccdet/types.hpp"

#include <vector>

namespace ccdet::attack {

// Sender/receiver parameters shared by one channel. Latencies are in
// microseconds; jitter_std is expressed in the unit of the channel's decode
// observable (usage percentage points for the CPU-load channel, microseconds
// for the cache and memory-bus channels).
struct ChannelConfig {
  ResourceKind kind = ResourceKind::cpu;
  double bit_interval = 1.0;       // seconds per bit when no rotation schedule is active
  double value_high = 80.0;        // usage % emitted for bit 1
  double value_low = 60.0;         // usage % emitted for bit 0 (~20 points under high)
  double base_latency = 100.0;     // receiver's uncontended probe latency t1
  double contended_latency = 300.0;
  double jitter_std = 0.0;
  double tick = 1.0;               // seconds between captor samples inside an epoch
  std::size_t resync_run_limit = 64;  // membus: flag runs of identical bits longer than this
  std::uint64_t seed = 0;

  void validate() const;
};

// Interval rotation: while an epoch starts inside dwell-window w, its length
// is intervals[w mod intervals.size()]. An empty list disables rotation and
// every epoch lasts cfg.bit_interval.
struct RotationSchedule {
  std::vector<double> intervals{7.0, 10.0, 20.0};  // seconds
  double dwell = 120.0;                            // seconds per window

  static RotationSchedule none() { return RotationSchedule{{}, 120.0}; }
  void validate() const;
};

// One bit's span in the trace; exposed so decoders and tests consume the same
// layout the encoders produced.
struct Epoch {
  std::int64_t start_ms = 0;
  std::int64_t length_ms = 0;
};
std::vector<Epoch> epoch_layout(std::size_t n_bits, const ChannelConfig& cfg,
                                const RotationSchedule& sched);

// Encoders: one epoch per payload bit, one sample per tick. The CPU channel
// modulates usage between value_high and value_low; the cache and memory-bus
// channels modulate the probe latency between contended_latency and
// base_latency (usage carries the same high/low levels as occupancy context).
Trace encode_cpu(const BitStream& payload, const ChannelConfig& cfg, const RotationSchedule& sched);
Trace encode_cache(const BitStream& payload, const ChannelConfig& cfg,
                   const RotationSchedule& sched);
Trace encode_membus(const BitStream& payload, const ChannelConfig& cfg,
                    const RotationSchedule& sched);

// Decoders: per epoch, compare the epoch's mean observable against the
// midpoint between the two levels; ties fall to 0. decode_membus judges
// mean(access time) - base against the contention margin and can flag a
// suspected sender reschedule when a run of identical bits exceeds
// cfg.resync_run_limit.
BitStream decode_cpu(const Trace& trace, const ChannelConfig& cfg, const RotationSchedule& sched);
BitStream decode_cache(const Trace& trace, const ChannelConfig& cfg, const RotationSchedule& sched);
BitStream decode_membus(const Trace& trace, const ChannelConfig& cfg, const RotationSchedule& sched,
                        bool* resync_flagged = nullptr);

// Dispatch on cfg.kind.
Trace encode(const BitStream& payload, const ChannelConfig& cfg, const RotationSchedule& sched);
BitStream decode(const Trace& trace, const ChannelConfig& cfg, const RotationSchedule& sched);

enum class WorkloadProfile { steady, bursty, diurnal };
std::string to_string(WorkloadProfile p);
WorkloadProfile workload_profile_from_string(const std::string& s);

// Innocent-traffic generator: a renewal process whose inter-arrival times are
// log-normal (shape set by the profile; the diurnal profile slowly modulates
// the scale over a one-hour period) and whose usage is beta-distributed.
Trace generate_overt(double duration_s, WorkloadProfile profile, std::uint64_t seed);

}  // namespace ccdet::attack
