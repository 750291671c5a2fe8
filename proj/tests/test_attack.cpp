#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ccdet/attack.hpp"
#include "ccdet/rng.hpp"
#include "ccdet/signature.hpp"
#include "ccdet/trace_io.hpp"

using namespace ccdet;
using namespace ccdet::attack;

namespace {

ChannelConfig flat_channel(ResourceKind kind, double bit_interval = 1.0) {
  ChannelConfig cfg;
  cfg.kind = kind;
  cfg.bit_interval = bit_interval;
  cfg.jitter_std = 0.0;
  return cfg;
}

// A single hand-built epoch of `n` one-second samples with the given levels.
Trace epoch_trace(ResourceKind kind, std::size_t n, double usage, double latency) {
  Trace t;
  t.label = TraceLabel::covert;
  t.channel = kind;
  for (std::size_t i = 0; i < n; ++i)
    t.samples.push_back({static_cast<std::int64_t>(i) * 1000, "vm-sender", kind, usage, latency});
  return t;
}

double interval_variance(const Trace& t) {
  const auto xs = sig::intervals(t);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

double interval_mean(const Trace& t) {
  const auto xs = sig::intervals(t);
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("cpu encoder emits the high level for a 1-bit at jitter 0") {
  auto cfg = flat_channel(ResourceKind::cpu, 5.0);
  const Trace t = encode_cpu(BitStream{{1}}, cfg, RotationSchedule::none());
  REQUIRE(t.samples.size() == 5);
  CHECK(t.label == TraceLabel::covert);
  REQUIRE(t.channel.has_value());
  CHECK(*t.channel == ResourceKind::cpu);
  for (const auto& s : t.samples) {
    CHECK(s.usage == 80.0);
    CHECK(s.latency_us == 0.0);
  }
}

TEST_CASE("cpu encoder alternates levels per epoch for 1,0,1") {
  auto cfg = flat_channel(ResourceKind::cpu, 3.0);
  const Trace t = encode_cpu(BitStream{{1, 0, 1}}, cfg, RotationSchedule::none());
  REQUIRE(t.samples.size() == 9);
  for (int i = 0; i < 3; ++i) CHECK(t.samples[i].usage == 80.0);
  for (int i = 3; i < 6; ++i) CHECK(t.samples[i].usage == 60.0);
  for (int i = 6; i < 9; ++i) CHECK(t.samples[i].usage == 80.0);
}

TEST_CASE("cpu decode thresholds the epoch mean at the level midpoint") {
  auto cfg = flat_channel(ResourceKind::cpu, 5.0);
  // Mean 75 > (80+60)/2 = 70 -> bit 1.
  CHECK(decode_cpu(epoch_trace(ResourceKind::cpu, 5, 75.0, 0.0), cfg, RotationSchedule::none()) ==
        BitStream{{1}});
  // Mean exactly 70 -> strict comparison falls to 0.
  CHECK(decode_cpu(epoch_trace(ResourceKind::cpu, 5, 70.0, 0.0), cfg, RotationSchedule::none()) ==
        BitStream{{0}});
}

TEST_CASE("cache encoder modulates latency between contended and base") {
  auto cfg = flat_channel(ResourceKind::cache, 4.0);
  const Trace ones = encode_cache(BitStream{{1}}, cfg, RotationSchedule::none());
  REQUIRE(ones.samples.size() == 4);
  for (const auto& s : ones.samples) CHECK(s.latency_us == 300.0);

  const Trace zeros = encode_cache(BitStream{{0}}, cfg, RotationSchedule::none());
  for (const auto& s : zeros.samples) CHECK(s.latency_us == 100.0);
}

TEST_CASE("cache decode compares mean latency against t1") {
  // base 0 and contended 300 put the latency threshold t1 at 150.
  auto cfg = flat_channel(ResourceKind::cache, 5.0);
  cfg.base_latency = 0.0;
  cfg.contended_latency = 300.0;
  CHECK(decode_cache(epoch_trace(ResourceKind::cache, 5, 60.0, 300.0), cfg,
                     RotationSchedule::none()) == BitStream{{1}});
  CHECK(decode_cache(epoch_trace(ResourceKind::cache, 5, 60.0, 100.0), cfg,
                     RotationSchedule::none()) == BitStream{{0}});
  CHECK(decode_cache(epoch_trace(ResourceKind::cache, 5, 60.0, 150.0), cfg,
                     RotationSchedule::none()) == BitStream{{0}});  // tie -> 0
}

TEST_CASE("membus encoder and decoder mirror the cache channel") {
  auto cfg = flat_channel(ResourceKind::membus, 4.0);
  const Trace ones = encode_membus(BitStream{{1, 1}}, cfg, RotationSchedule::none());
  for (const auto& s : ones.samples) CHECK(s.latency_us == 300.0);

  // Decision is on mean(access time) - base against half the contention gap.
  CHECK(decode_membus(epoch_trace(ResourceKind::membus, 4, 60.0, 290.0), cfg,
                      RotationSchedule::none()) == BitStream{{1}});
  CHECK(decode_membus(epoch_trace(ResourceKind::membus, 4, 60.0, 110.0), cfg,
                      RotationSchedule::none()) == BitStream{{0}});
}

TEST_CASE("membus decode flags suspiciously long identical-bit runs") {
  auto cfg = flat_channel(ResourceKind::membus, 1.0);
  REQUIRE(cfg.resync_run_limit == 64);

  BitStream long_run;
  long_run.bits.assign(70, 1);
  bool flagged = false;
  const Trace t = encode_membus(long_run, cfg, RotationSchedule::none());
  CHECK(decode_membus(t, cfg, RotationSchedule::none(), &flagged) == long_run);
  CHECK(flagged);

  BitStream alternating;
  for (int i = 0; i < 70; ++i) alternating.bits.push_back(i & 1);
  flagged = true;
  const Trace t2 = encode_membus(alternating, cfg, RotationSchedule::none());
  CHECK(decode_membus(t2, cfg, RotationSchedule::none(), &flagged) == alternating);
  CHECK(!flagged);
}

TEST_CASE("round trip is the identity at jitter 0 for every channel") {
  auto rng = make_engine(101);
  std::uniform_int_distribution<std::size_t> length(1, 1024);
  for (auto kind : {ResourceKind::cpu, ResourceKind::cache, ResourceKind::membus}) {
    auto cfg = flat_channel(kind, 2.0);
    for (int trial = 0; trial < 8; ++trial) {
      const auto payload = BitStream::random(length(rng), rng());
      const Trace t = encode(payload, cfg, RotationSchedule::none());
      CHECK(decode(t, cfg, RotationSchedule::none()) == payload);
    }
  }
}

TEST_CASE("round trip survives the rotating epoch schedule") {
  const RotationSchedule sched;  // 7/10/20 s rotating every 120 s
  for (auto kind : {ResourceKind::cpu, ResourceKind::cache, ResourceKind::membus}) {
    auto cfg = flat_channel(kind);
    const auto payload = BitStream::random(64, 7 + static_cast<std::uint64_t>(kind));
    const Trace t = encode(payload, cfg, sched);
    CHECK(decode(t, cfg, sched) == payload);
  }
}

TEST_CASE("epoch layout follows the dwell-window rotation rule") {
  const RotationSchedule sched;
  const auto layout = epoch_layout(64, flat_channel(ResourceKind::cpu), sched);
  REQUIRE(layout.size() == 64);
  CHECK(layout[0].start_ms == 0);
  CHECK(layout[0].length_ms == 7000);
  // 18 seven-second epochs fill the first dwell window (last starts at 119 s).
  CHECK(layout[17].start_ms == 119000);
  CHECK(layout[17].length_ms == 7000);
  CHECK(layout[18].start_ms == 126000);
  CHECK(layout[18].length_ms == 10000);
  // Fourth window wraps back to 7 s epochs.
  CHECK(layout[36].start_ms == 366000);
  CHECK(layout[36].length_ms == 7000);
  CHECK(layout[63].start_ms == 585000);
  CHECK(layout[63].length_ms == 10000);

  // Encoding uses exactly this layout: one sample per tick over 595 s.
  const Trace t =
      encode_cpu(BitStream::random(64, 1), flat_channel(ResourceKind::cpu), sched);
  CHECK(t.samples.size() == 595);
  CHECK(t.samples.back().timestamp_ms == 594000);
}

TEST_CASE("an empty rotation list falls back to the flat bit interval") {
  auto cfg = flat_channel(ResourceKind::cpu, 3.0);
  const auto layout = epoch_layout(5, cfg, RotationSchedule::none());
  for (const auto& e : layout) CHECK(e.length_ms == 3000);
}

TEST_CASE("encoders reject bad inputs") {
  auto cpu = flat_channel(ResourceKind::cpu);
  CHECK_THROWS_WITH_AS(encode_cpu(BitStream{}, cpu, RotationSchedule::none()),
                       doctest::Contains("empty"), std::invalid_argument);
  auto cache = flat_channel(ResourceKind::cache);
  CHECK_THROWS_WITH_AS(encode_cpu(BitStream{{1}}, cache, RotationSchedule::none()),
                       doctest::Contains("expected cpu"), std::invalid_argument);
  CHECK_THROWS_AS(decode_cache(epoch_trace(ResourceKind::cpu, 3, 50.0, 0.0), cpu,
                               RotationSchedule::none()),
                  std::invalid_argument);

  // An epoch shorter than one captor tick can never carry a sample.
  RotationSchedule tiny;
  tiny.intervals = {0.5};
  CHECK_THROWS_WITH_AS(encode_cpu(BitStream{{1}}, cpu, tiny), doctest::Contains("captor tick"),
                       std::invalid_argument);

  Trace empty;
  empty.label = TraceLabel::covert;
  empty.channel = ResourceKind::cpu;
  CHECK_THROWS_WITH_AS(decode_cpu(empty, cpu, RotationSchedule::none()),
                       doctest::Contains("shorter than one epoch"), std::invalid_argument);
}

TEST_CASE("channel config validation bounds the signal margins") {
  auto cfg = flat_channel(ResourceKind::cpu);
  cfg.value_low = 75.0;  // 5-point margin is too thin to decode reliably
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.value_low = 20.0;  // 60-point margin is out of the modeled regime
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.value_low = 60.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.base_latency = 400.0;  // base above contended
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("encoding is deterministic per seed even with jitter") {
  auto cfg = flat_channel(ResourceKind::cache);
  cfg.jitter_std = 15.0;
  cfg.seed = 99;
  const auto payload = BitStream::random(128, 3);
  const Trace a = encode_cache(payload, cfg, RotationSchedule::none());
  const Trace b = encode_cache(payload, cfg, RotationSchedule::none());
  CHECK(trace_to_string(a) == trace_to_string(b));

  cfg.seed = 100;
  const Trace c = encode_cache(payload, cfg, RotationSchedule::none());
  CHECK(trace_to_string(a) != trace_to_string(c));
}

TEST_CASE("bit error rate does not improve as jitter grows") {
  const std::size_t trials = 100, bits_per_trial = 32;

  auto sweep = [&](ResourceKind kind, std::initializer_list<double> levels) {
    std::vector<double> ber;
    for (double level : levels) {
      std::size_t errors = 0;
      for (std::size_t trial = 0; trial < trials; ++trial) {
        auto cfg = flat_channel(kind);
        cfg.jitter_std = level;
        cfg.seed = derive_seed(500, "jitter-trial", trial);
        const auto payload = BitStream::random(bits_per_trial, trial);
        const auto back = decode(encode(payload, cfg, RotationSchedule::none()), cfg,
                                 RotationSchedule::none());
        REQUIRE(back.size() == payload.size());
        for (std::size_t i = 0; i < payload.size(); ++i)
          if (back.bits[i] != payload.bits[i]) ++errors;
      }
      ber.push_back(static_cast<double>(errors) /
                    static_cast<double>(trials * bits_per_trial));
    }
    // Non-decreasing, with statistical slack of at most one adjacent inversion.
    std::size_t inversions = 0;
    for (std::size_t i = 1; i < ber.size(); ++i)
      if (ber[i] < ber[i - 1]) ++inversions;
    CHECK(inversions <= 1);
    CHECK(ber.back() > ber.front());  // the extremes must separate cleanly
  };

  sweep(ResourceKind::cpu, {0.0, 8.0, 16.0});       // usage gap 20 points
  sweep(ResourceKind::membus, {20.0, 60.0, 120.0});  // latency gap 200 us
}

TEST_CASE("overt generation is deterministic and profile names round-trip") {
  const Trace a = generate_overt(600.0, WorkloadProfile::steady, 4);
  const Trace b = generate_overt(600.0, WorkloadProfile::steady, 4);
  CHECK(a == b);
  CHECK(a.label == TraceLabel::overt);
  CHECK(!a.channel.has_value());
  CHECK_NOTHROW(a.validate());
  REQUIRE(a.samples.size() > 50);

  const Trace c = generate_overt(600.0, WorkloadProfile::steady, 5);
  CHECK(a != c);

  for (auto p : {WorkloadProfile::steady, WorkloadProfile::bursty, WorkloadProfile::diurnal})
    CHECK(workload_profile_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(workload_profile_from_string("spiky"), std::invalid_argument);
}

TEST_CASE("bursty intervals vary more than steady ones at the same mean") {
  const Trace steady = generate_overt(20000.0, WorkloadProfile::steady, 6);
  const Trace bursty = generate_overt(20000.0, WorkloadProfile::bursty, 6);
  CHECK(interval_mean(bursty) == doctest::Approx(interval_mean(steady)).epsilon(0.25));
  CHECK(interval_variance(bursty) > 2.0 * interval_variance(steady));
}

TEST_CASE("degenerate overt durations") {
  CHECK(generate_overt(0.0, WorkloadProfile::steady, 1).samples.empty());
  CHECK_THROWS_AS(generate_overt(-1.0, WorkloadProfile::steady, 1), std::invalid_argument);
}
