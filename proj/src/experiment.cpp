#include "ccdet/experiment.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ccdet/rng.hpp"

namespace ccdet {

namespace {

using attack::WorkloadProfile;

constexpr std::array<WorkloadProfile, 3> kProfiles{
    WorkloadProfile::steady, WorkloadProfile::bursty, WorkloadProfile::diurnal};

[[noreturn]] void stage_fail(const std::string& stage, ResourceKind channel,
                             const std::exception& e) {
  throw std::runtime_error(stage + " (" + to_string(channel) + " channel): " + e.what());
}

void truncate(Trace& t, std::size_t n) {
  if (t.samples.size() > n) t.samples.resize(n);
}

std::vector<double> trace_intervals_s(const Trace& t) { return sig::intervals(t); }

// Interleaves the three overt profiles' records so any temporal prefix of the
// negative class spans all workload shapes.
std::vector<SignatureRecord> interleave(const std::array<std::vector<SignatureRecord>, 3>& per) {
  std::vector<SignatureRecord> out;
  out.reserve(per[0].size() + per[1].size() + per[2].size());
  const std::size_t longest = std::max({per[0].size(), per[1].size(), per[2].size()});
  for (std::size_t i = 0; i < longest; ++i)
    for (const auto& v : per)
      if (i < v.size()) out.push_back(v[i]);
  return out;
}

// Mirrors the signature stage's chunking so baseline scores line up 1:1 with
// its blocks: full chunks of N plus a tail only if it still has >= 5 entries.
std::vector<std::pair<std::size_t, std::size_t>> chunk_bounds(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += size) {
    const std::size_t hi = std::min(lo + size, n);
    if (hi - lo < 5) break;
    out.emplace_back(lo, hi);
  }
  return out;
}

struct TestCorpus {
  std::vector<Trace> traces;  // covert first, then the three overt profiles
  // Pooled moments of the noise-target series (intervals or latencies) across
  // the whole corpus; a single trace can be constant, the pool never is.
  double pooled_std = 0.0;
  double pooled_mean = 0.0;
};

std::vector<Block> featurize_corpus(const std::vector<Trace>& traces,
                                    const sig::ReferenceDistribution& ref,
                                    const sig::SignatureConfig& scfg) {
  std::vector<Block> blocks;
  for (const auto& t : traces) {
    auto b = sig::build_signature(t, ref, scfg);
    blocks.insert(blocks.end(), std::make_move_iterator(b.begin()),
                  std::make_move_iterator(b.end()));
  }
  return blocks;
}

}  // namespace

Trace overt_with_samples(std::size_t n, WorkloadProfile profile, std::uint64_t seed) {
  if (n == 0) return attack::generate_overt(0.0, profile, seed);
  double duration = static_cast<double>(n) * 5.0 * 1.2 + 60.0;
  for (;;) {
    Trace t = attack::generate_overt(duration, profile, seed);
    if (t.samples.size() >= n) {
      truncate(t, n);
      return t;
    }
    duration *= 1.5;
  }
}

Trace covert_with_samples(std::size_t n, const attack::ChannelConfig& cfg,
                          const attack::RotationSchedule& sched, std::uint64_t payload_seed) {
  if (n == 0) throw std::invalid_argument("covert corpus needs at least 1 sample");
  const auto tick_ms = static_cast<std::int64_t>(std::llround(cfg.tick * 1000.0));
  std::size_t bits = std::max<std::size_t>(1, n / 4);
  for (;;) {
    const auto layout = attack::epoch_layout(bits, cfg, sched);
    std::size_t ticks = 0;
    for (const auto& e : layout) ticks += static_cast<std::size_t>(e.length_ms / tick_ms);
    if (ticks >= n) break;
    bits *= 2;
  }
  Trace t = attack::encode(BitStream::random(bits, payload_seed), cfg, sched);
  truncate(t, n);
  return t;
}

sig::ReferenceDistribution reference_from_trace(const Trace& overt_trace,
                                                sig::ReferenceDistribution::Mode mode) {
  const auto iv = sig::intervals(overt_trace);
  if (mode == sig::ReferenceDistribution::Mode::two_sample_overt)
    return sig::make_overt_reference(iv);
  return sig::fit_gaussian_reference(iv);
}

namespace {

eval::EvalCell run_cell(const RunConfig& cfg, ResourceKind channel, std::size_t block_size,
                        const sig::ReferenceDistribution& ref, const Trace& covert_train,
                        const std::array<Trace, 3>& overt_train, const TestCorpus& test,
                        std::uint64_t eseed) {
  const std::string tag = to_string(channel);
  sig::SignatureConfig scfg = cfg.signature;
  scfg.block_size = block_size;

  // Featurize training corpus and assemble the balanced training set.
  std::vector<SignatureRecord> train_records;
  try {
    train_records = sig::flatten(sig::build_signature(covert_train, ref, scfg));
    std::array<std::vector<SignatureRecord>, 3> overt_records;
    for (std::size_t p = 0; p < 3; ++p)
      overt_records[p] = sig::flatten(sig::build_signature(overt_train[p], ref, scfg));
    const auto interleaved = interleave(overt_records);
    train_records.insert(train_records.end(), interleaved.begin(), interleaved.end());
  } catch (const std::exception& e) {
    stage_fail("featurize training corpus", channel, e);
  }

  std::vector<SignatureRecord> balanced;
  try {
    const auto bal_seed =
        derive_seed(cfg.stage_seed("signature", cfg.signature_seed), tag + "/balance", block_size);
    balanced = sig::balance(train_records, cfg.eval.train_size, bal_seed);
  } catch (const std::exception& e) {
    stage_fail("balance training set", channel, e);
  }

  // Train through the worker pipeline; one worker degenerates to the
  // single-machine path exactly.
  svm::TrainedModel model;
  try {
    const auto dist_seed =
        derive_seed(cfg.stage_seed("distributed", cfg.distributed_seed), tag, block_size);
    const auto parts = dist::partition(balanced, cfg.workers, dist_seed);
    model = dist::train_distributed(parts, cfg.svm, dist_seed).model;
  } catch (const std::exception& e) {
    stage_fail("train classifier", channel, e);
  }

  eval::EvalCell cell;
  cell.channel = channel;
  cell.block_size = block_size;

  std::vector<Block> test_blocks;
  try {
    test_blocks = featurize_corpus(test.traces, ref, scfg);
    cell.cm = eval::evaluate(model, test_blocks, cfg.eval.record_level);
  } catch (const std::exception& e) {
    stage_fail("evaluate test corpus", channel, e);
  }

  // Baseline ROC over the same block layout.
  try {
    std::vector<double> scores;
    std::vector<TraceLabel> labels;
    for (const auto& t : test.traces) {
      const auto iv = trace_intervals_s(t);
      for (const auto& [lo, hi] : chunk_bounds(iv.size(), block_size)) {
        scores.push_back(
            eval::berk_score(std::vector<double>(iv.begin() + static_cast<std::ptrdiff_t>(lo),
                                                 iv.begin() + static_cast<std::ptrdiff_t>(hi))));
        labels.push_back(t.label);
      }
    }
    cell.berk_roc = eval::roc_points(scores, labels);
  } catch (const std::exception& e) {
    stage_fail("baseline comparison", channel, e);
  }

  // Noise sweep: perturb the test corpus, refeaturize, re-evaluate.
  try {
    const double basis = cfg.eval.noise_basis == eval::NoiseBasis::std_dev ? test.pooled_std
                                                                           : test.pooled_mean;
    const double noise_std = cfg.eval.noise_fraction * basis;
    if (noise_std > 0.0) {
      cell.mean_snr_db = 20.0 * std::log10(test.pooled_std / noise_std);
      const double clean_error = cell.cm.error_rate();
      double delta_sum = 0.0;
      for (std::size_t s = 0; s < cfg.eval.noise_seeds; ++s) {
        const auto sweep_seed = derive_seed(eseed, tag + "/noise", block_size * 1000 + s);
        std::vector<Trace> noisy;
        noisy.reserve(test.traces.size());
        for (std::size_t t = 0; t < test.traces.size(); ++t) {
          if (cfg.eval.noise_target == eval::NoiseTarget::intervals) {
            noisy.push_back(eval::with_interval_noise(test.traces[t], noise_std,
                                                      derive_seed(sweep_seed, "trace", t)));
          } else {
            // Latency perturbation: the signature never reads latency, so this
            // leaves the features alone by construction; kept for parity with
            // the config switch.
            Trace copy = test.traces[t];
            auto rng = make_engine(derive_seed(sweep_seed, "trace", t));
            std::normal_distribution<double> noise(0.0, noise_std);
            for (auto& smp : copy.samples)
              smp.latency_us = std::max(0.0, smp.latency_us + noise(rng));
            noisy.push_back(std::move(copy));
          }
        }
        const auto noisy_blocks = featurize_corpus(noisy, ref, scfg);
        const auto noisy_cm = eval::evaluate(model, noisy_blocks, cfg.eval.record_level);
        delta_sum += (noisy_cm.error_rate() - clean_error) * 100.0;
      }
      cell.noise_delta_pct = delta_sum / static_cast<double>(cfg.eval.noise_seeds);
    } else {
      cell.mean_snr_db = std::numeric_limits<double>::infinity();
      cell.noise_delta_pct = 0.0;
    }
  } catch (const std::exception& e) {
    stage_fail("noise robustness sweep", channel, e);
  }

  return cell;
}

}  // namespace

eval::EvalReport run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const auto eseed = cfg.stage_seed("eval", cfg.eval.seed);

  eval::EvalReport report;
  report.master_seed = cfg.master_seed;
  report.workers = cfg.workers;
  report.noise_fraction = cfg.eval.noise_fraction;
  report.noise_seeds = cfg.eval.noise_seeds;

  for (ResourceKind channel : {ResourceKind::cpu, ResourceKind::cache, ResourceKind::membus}) {
    const std::string tag = to_string(channel);
    attack::ChannelConfig ch = cfg.channel;
    ch.kind = channel;

    sig::ReferenceDistribution ref;
    try {
      const Trace ref_trace = overt_with_samples(cfg.eval.ref_samples, WorkloadProfile::steady,
                                                 derive_seed(eseed, tag + "/reference"));
      ref = reference_from_trace(ref_trace, cfg.reference_mode);
    } catch (const std::exception& e) {
      stage_fail("build overt reference", channel, e);
    }

    Trace covert_train;
    std::array<Trace, 3> overt_train;
    TestCorpus test;
    try {
      attack::ChannelConfig ch_train = ch;
      ch_train.seed = derive_seed(eseed, tag + "/train-covert");
      covert_train = covert_with_samples(cfg.eval.train_samples, ch_train, cfg.rotation,
                                         derive_seed(eseed, tag + "/train-bits"));
      attack::ChannelConfig ch_test = ch;
      ch_test.seed = derive_seed(eseed, tag + "/test-covert");
      test.traces.push_back(covert_with_samples(cfg.eval.test_samples, ch_test, cfg.rotation,
                                                derive_seed(eseed, tag + "/test-bits")));
      for (std::size_t p = 0; p < 3; ++p) {
        const auto profile = kProfiles[p];
        overt_train[p] =
            overt_with_samples(cfg.eval.train_samples / 3, profile,
                               derive_seed(eseed, tag + "/train-overt-" + to_string(profile)));
        test.traces.push_back(
            overt_with_samples(cfg.eval.test_samples / 3, profile,
                               derive_seed(eseed, tag + "/test-overt-" + to_string(profile))));
      }
    } catch (const std::exception& e) {
      stage_fail("generate corpora", channel, e);
    }

    {
      std::vector<double> pooled;
      for (const auto& t : test.traces) {
        if (cfg.eval.noise_target == eval::NoiseTarget::intervals) {
          const auto iv = trace_intervals_s(t);
          pooled.insert(pooled.end(), iv.begin(), iv.end());
        } else {
          for (const auto& s : t.samples) pooled.push_back(s.latency_us);
        }
      }
      const double mean =
          std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
      double ss = 0.0;
      for (double v : pooled) ss += (v - mean) * (v - mean);
      test.pooled_mean = mean;
      test.pooled_std = std::sqrt(ss / static_cast<double>(pooled.size() - 1));
    }

    for (std::size_t block_size : eval::kBlockSizes)
      report.cells.push_back(
          run_cell(cfg, channel, block_size, ref, covert_train, overt_train, test, eseed));
  }
  return report;
}

}  // namespace ccdet
