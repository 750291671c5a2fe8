#include "ccdet/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ccdet/rng.hpp"

namespace ccdet::attack {

namespace {

constexpr const char* kSenderProcess = "vm-sender";
constexpr const char* kOvertProcess = "vm-app";

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

// normal_distribution requires a positive stddev, so zero jitter short-circuits.
double jittered(double value, double stddev, std::mt19937_64& rng) {
  if (stddev <= 0.0) return value;
  std::normal_distribution<double> noise(0.0, stddev);
  return value + noise(rng);
}

Trace encode_impl(const BitStream& payload, const ChannelConfig& cfg,
                  const RotationSchedule& sched, ResourceKind expected_kind) {
  cfg.validate();
  sched.validate();
  if (cfg.kind != expected_kind)
    throw std::invalid_argument("channel config kind is " + to_string(cfg.kind) +
                                ", expected " + to_string(expected_kind));
  if (payload.empty()) throw std::invalid_argument("payload is empty: nothing to encode");

  const auto layout = epoch_layout(payload.size(), cfg, sched);
  const std::int64_t tick_ms = to_ms(cfg.tick);
  auto rng = make_engine(cfg.seed);

  Trace trace;
  trace.label = TraceLabel::covert;
  trace.channel = cfg.kind;
  trace.seed = cfg.seed;
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const bool one = payload.bits[i] != 0;
    const Epoch& e = layout[i];
    for (std::int64_t t = e.start_ms; t + tick_ms <= e.start_ms + e.length_ms; t += tick_ms) {
      ResourceSample s;
      s.timestamp_ms = t;
      s.process_id = kSenderProcess;
      s.kind = cfg.kind;
      if (cfg.kind == ResourceKind::cpu) {
        // The load level is the signal; jitter lands on it directly.
        s.usage = std::clamp(jittered(one ? cfg.value_high : cfg.value_low, cfg.jitter_std, rng),
                             0.0, 100.0);
        s.latency_us = 0.0;
      } else {
        // Latency is the signal; usage records the clean occupancy level.
        s.usage = one ? cfg.value_high : cfg.value_low;
        s.latency_us = std::max(
            0.0, jittered(one ? cfg.contended_latency : cfg.base_latency, cfg.jitter_std, rng));
      }
      trace.samples.push_back(std::move(s));
    }
  }
  return trace;
}

// Length of the epoch starting at start_ms under the active rotation rule.
std::int64_t epoch_length_ms(std::int64_t start_ms, const ChannelConfig& cfg,
                             const RotationSchedule& sched, std::int64_t tick_ms) {
  const double len_s =
      sched.intervals.empty()
          ? cfg.bit_interval
          : sched.intervals[static_cast<std::size_t>(
                (start_ms / to_ms(sched.dwell)) %
                static_cast<std::int64_t>(sched.intervals.size()))];
  const std::int64_t len_ms = to_ms(len_s);
  if (len_ms < tick_ms)
    throw std::invalid_argument("epoch of " + std::to_string(len_ms) +
                                " ms is shorter than one captor tick");
  return len_ms;
}

// Mean of the chosen observable over each epoch that has at least one sample.
std::vector<double> epoch_means(const Trace& trace, const ChannelConfig& cfg,
                                const RotationSchedule& sched, bool use_latency) {
  cfg.validate();
  sched.validate();
  trace.validate();
  const std::int64_t tick_ms = to_ms(cfg.tick);
  if (tick_ms < 1) throw std::invalid_argument("channel tick must be at least 1 ms");

  std::vector<double> means;
  std::size_t i = 0;
  std::int64_t start = 0;
  while (i < trace.samples.size()) {
    const std::int64_t len_ms = epoch_length_ms(start, cfg, sched, tick_ms);
    double sum = 0.0;
    std::size_t n = 0;
    while (i < trace.samples.size() && trace.samples[i].timestamp_ms < start + len_ms) {
      sum += use_latency ? trace.samples[i].latency_us : trace.samples[i].usage;
      ++n;
      ++i;
    }
    if (n == 0) break;  // gap past the encoded span
    means.push_back(sum / static_cast<double>(n));
    start += len_ms;
  }
  if (means.empty())
    throw std::invalid_argument("trace shorter than one epoch: nothing to decode");
  return means;
}

BitStream threshold_bits(const std::vector<double>& means, double threshold) {
  BitStream bits;
  bits.bits.reserve(means.size());
  for (double m : means) bits.bits.push_back(m > threshold ? 1 : 0);  // ties decode to 0
  return bits;
}

}  // namespace

void ChannelConfig::validate() const {
  if (!(bit_interval > 0.0)) throw std::invalid_argument("channel.bit_interval must be > 0");
  if (!(tick > 0.0)) throw std::invalid_argument("channel tick must be > 0");
  if (value_low < 0.0 || value_high > 100.0 || !(value_high > value_low))
    throw std::invalid_argument("channel usage levels must satisfy 0 <= low < high <= 100");
  const double margin = value_high - value_low;
  if (margin < 15.0 || margin > 25.0)
    throw std::invalid_argument("high/low usage margin must stay within 20 +/- 5 points");
  if (base_latency < 0.0 || !(contended_latency > base_latency))
    throw std::invalid_argument("latencies must satisfy 0 <= base < contended");
  if (jitter_std < 0.0) throw std::invalid_argument("channel.jitter_std must be >= 0");
  if (resync_run_limit == 0) throw std::invalid_argument("resync run limit must be >= 1");
}

void RotationSchedule::validate() const {
  for (double v : intervals)
    if (!(v > 0.0)) throw std::invalid_argument("rotation intervals must be > 0");
  if (!(dwell > 0.0)) throw std::invalid_argument("rotation dwell must be > 0");
}

std::vector<Epoch> epoch_layout(std::size_t n_bits, const ChannelConfig& cfg,
                                const RotationSchedule& sched) {
  cfg.validate();
  sched.validate();
  const std::int64_t tick_ms = to_ms(cfg.tick);
  if (tick_ms < 1) throw std::invalid_argument("channel tick must be at least 1 ms");

  std::vector<Epoch> layout;
  layout.reserve(n_bits);
  std::int64_t start = 0;
  for (std::size_t b = 0; b < n_bits; ++b) {
    const std::int64_t len_ms = epoch_length_ms(start, cfg, sched, tick_ms);
    layout.push_back(Epoch{start, len_ms});
    start += len_ms;
  }
  return layout;
}

Trace encode_cpu(const BitStream& payload, const ChannelConfig& cfg,
                 const RotationSchedule& sched) {
  return encode_impl(payload, cfg, sched, ResourceKind::cpu);
}

Trace encode_cache(const BitStream& payload, const ChannelConfig& cfg,
                   const RotationSchedule& sched) {
  return encode_impl(payload, cfg, sched, ResourceKind::cache);
}

Trace encode_membus(const BitStream& payload, const ChannelConfig& cfg,
                    const RotationSchedule& sched) {
  return encode_impl(payload, cfg, sched, ResourceKind::membus);
}

BitStream decode_cpu(const Trace& trace, const ChannelConfig& cfg, const RotationSchedule& sched) {
  if (cfg.kind != ResourceKind::cpu)
    throw std::invalid_argument("decode_cpu needs a cpu channel config");
  return threshold_bits(epoch_means(trace, cfg, sched, /*use_latency=*/false),
                        (cfg.value_high + cfg.value_low) / 2.0);
}

BitStream decode_cache(const Trace& trace, const ChannelConfig& cfg,
                       const RotationSchedule& sched) {
  if (cfg.kind != ResourceKind::cache)
    throw std::invalid_argument("decode_cache needs a cache channel config");
  return threshold_bits(epoch_means(trace, cfg, sched, /*use_latency=*/true),
                        (cfg.base_latency + cfg.contended_latency) / 2.0);
}

BitStream decode_membus(const Trace& trace, const ChannelConfig& cfg,
                        const RotationSchedule& sched, bool* resync_flagged) {
  if (cfg.kind != ResourceKind::membus)
    throw std::invalid_argument("decode_membus needs a membus channel config");
  const auto means = epoch_means(trace, cfg, sched, /*use_latency=*/true);
  // Judge the contention excess over the uncontended base, per probe practice.
  BitStream bits;
  bits.bits.reserve(means.size());
  const double margin = (cfg.contended_latency - cfg.base_latency) / 2.0;
  for (double m : means) bits.bits.push_back((m - cfg.base_latency) > margin ? 1 : 0);

  if (resync_flagged != nullptr) {
    *resync_flagged = false;
    std::size_t run = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      run = (i > 0 && bits.bits[i] == bits.bits[i - 1]) ? run + 1 : 1;
      if (run > cfg.resync_run_limit) {
        *resync_flagged = true;  // sender likely rescheduled mid-stream
        break;
      }
    }
  }
  return bits;
}

Trace encode(const BitStream& payload, const ChannelConfig& cfg, const RotationSchedule& sched) {
  switch (cfg.kind) {
    case ResourceKind::cpu: return encode_cpu(payload, cfg, sched);
    case ResourceKind::cache: return encode_cache(payload, cfg, sched);
    case ResourceKind::membus: return encode_membus(payload, cfg, sched);
  }
  throw std::logic_error("unreachable channel kind");
}

BitStream decode(const Trace& trace, const ChannelConfig& cfg, const RotationSchedule& sched) {
  switch (cfg.kind) {
    case ResourceKind::cpu: return decode_cpu(trace, cfg, sched);
    case ResourceKind::cache: return decode_cache(trace, cfg, sched);
    case ResourceKind::membus: return decode_membus(trace, cfg, sched);
  }
  throw std::logic_error("unreachable channel kind");
}

std::string to_string(WorkloadProfile p) {
  switch (p) {
    case WorkloadProfile::steady: return "steady";
    case WorkloadProfile::bursty: return "bursty";
    case WorkloadProfile::diurnal: return "diurnal";
  }
  throw std::logic_error("unreachable workload profile");
}

WorkloadProfile workload_profile_from_string(const std::string& s) {
  if (s == "steady") return WorkloadProfile::steady;
  if (s == "bursty") return WorkloadProfile::bursty;
  if (s == "diurnal") return WorkloadProfile::diurnal;
  throw std::invalid_argument("unknown workload profile: '" + s + "'");
}

Trace generate_overt(double duration_s, WorkloadProfile profile, std::uint64_t seed) {
  if (duration_s < 0.0) throw std::invalid_argument("overt duration must be >= 0");

  Trace trace;
  trace.label = TraceLabel::overt;
  trace.seed = seed;
  if (duration_s == 0.0) return trace;

  // Log-normal inter-arrival gaps, mean 5 s for every profile; the shape
  // parameter sets how bursty the renewal process looks, and the diurnal
  // profile swings the scale over a one-hour period.
  const double mean_gap = 5.0;
  double sigma = 0.25, beta_a = 2.0, beta_b = 6.0;
  switch (profile) {
    case WorkloadProfile::steady: break;
    case WorkloadProfile::bursty:
      sigma = 1.0;
      beta_a = 1.2;
      beta_b = 3.0;
      break;
    case WorkloadProfile::diurnal: sigma = 0.4; break;
  }
  const double mu0 = std::log(mean_gap) - 0.5 * sigma * sigma;

  auto rng = make_engine(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::gamma_distribution<double> ga(beta_a, 1.0);
  std::gamma_distribution<double> gb(beta_b, 1.0);

  double t = 0.0;
  std::int64_t prev_ms = -1;
  while (t < duration_s) {
    std::int64_t ts = to_ms(t);
    if (ts <= prev_ms) ts = prev_ms + 1;  // keep rounded stamps strictly increasing
    prev_ms = ts;

    const double x = ga(rng);
    const double y = gb(rng);
    ResourceSample s;
    s.timestamp_ms = ts;
    s.process_id = kOvertProcess;
    s.kind = ResourceKind::cpu;
    s.usage = std::clamp(100.0 * x / (x + y), 0.0, 100.0);
    s.latency_us = 0.0;
    trace.samples.push_back(std::move(s));

    const double mu =
        mu0 + (profile == WorkloadProfile::diurnal
                   ? 0.5 * std::sin(2.0 * std::numbers::pi * t / 3600.0)
                   : 0.0);
    t += std::exp(mu + sigma * z(rng));
  }
  return trace;
}

}  // namespace ccdet::attack
