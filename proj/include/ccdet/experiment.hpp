#pragma once

#include "ccdet/config.hpp"
#include "ccdet/distributed.hpp"
#include "ccdet/eval.hpp"

namespace ccdet {

// Corpus helpers shared by the experiment and the CLI: deterministic traces
// with an exact sample count (generation is prefix-stable, so asking for more
// and truncating keeps the same leading samples).
Trace overt_with_samples(std::size_t n, attack::WorkloadProfile profile, std::uint64_t seed);
Trace covert_with_samples(std::size_t n, const attack::ChannelConfig& cfg,
                          const attack::RotationSchedule& sched, std::uint64_t payload_seed);

// Builds the reference the signature stage scores against, honoring the
// configured reference mode.
sig::ReferenceDistribution reference_from_trace(const Trace& overt_trace,
                                                sig::ReferenceDistribution::Mode mode);

// Full protocol: per channel, generate disjoint train/test corpora, featurize
// at both detection block sizes, train (via the worker pipeline when
// distributed.workers > 1), evaluate, sweep noise seeds, and attach the
// first-order baseline ROC. Deterministic given the master seed.
eval::EvalReport run_experiment(const RunConfig& cfg);

}  // namespace ccdet
