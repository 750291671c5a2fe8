#pragma once

#include "ccdet/attack.hpp"
#include "ccdet/eval.hpp"
#include "ccdet/signature.hpp"
#include "ccdet/svm.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace ccdet {

// Whole-run configuration. Stage seeds of 0 mean "derive from the master
// seed", so one seed reproduces an entire experiment while any stage can
// still be pinned individually.
struct RunConfig {
  std::uint64_t master_seed = 42;  // key: seed

  attack::ChannelConfig channel;       // channel.*
  attack::RotationSchedule rotation;   // rotation.*
  sig::SignatureConfig signature;      // signature.{block_size,binarize_ks,significance}
  sig::ReferenceDistribution::Mode reference_mode =
      sig::ReferenceDistribution::Mode::two_sample_overt;  // signature.reference_mode
  std::uint64_t signature_seed = 0;    // signature.seed (balanced sampling)

  svm::KernelParams svm;               // svm.{gamma,box_constraint,tolerance,max_passes}
  std::uint64_t svm_seed = 0;          // svm.seed

  std::size_t workers = 8;             // distributed.workers
  std::uint64_t distributed_seed = 0;  // distributed.seed

  eval::EvalConfig eval;               // eval.*

  RunConfig() { channel.jitter_std = 2.0; }

  void validate() const;

  // Explicit stage seed wins; otherwise split the master seed by stage tag.
  std::uint64_t stage_seed(std::string_view stage, std::uint64_t explicit_seed) const;
};

// One "key=value" assignment (the config-file grammar and the CLI --set
// grammar are the same). Throws on unknown keys or unparseable values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// Line-oriented key=value file; '#' starts a comment, blank lines ignored.
RunConfig load_config(const std::filesystem::path& path);
RunConfig load_config(std::istream& in, const std::string& name);

}  // namespace ccdet
