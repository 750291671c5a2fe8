#pragma once

#include "ccdet/svm.hpp"

#include <vector>

namespace ccdet::dist {

// One simulated worker's share of the balanced training set.
struct WorkerPartition {
  std::size_t worker_id = 1;  // 1-based
  std::vector<SignatureRecord> records;

  bool operator==(const WorkerPartition&) const = default;
};

// Merged classifier: the union of every worker's support vectors (each keeping
// its own multiplier) with the arithmetic mean of the worker biases. All
// workers share one feature scaling and one resolved gamma, so the merged
// kernel sum is well defined.
struct MergedModel {
  svm::TrainedModel model;
  std::vector<std::size_t> provenance;          // per-SV worker_id
  std::vector<double> worker_biases;            // ordered by worker_id
  std::vector<svm::TrainedModel> worker_models;  // kept for post-mortem inspection
};

// Deals the balanced record set across m workers: each class is split
// round-robin (after a seeded shuffle when m > 1), so every partition is
// itself balanced and sizes differ by at most one covert/overt pair. m == 1
// returns the input untouched.
std::vector<WorkerPartition> partition(const std::vector<SignatureRecord>& records, std::size_t m,
                                       std::uint64_t seed);

// Trains one local model per partition and merges them. With a single
// partition the result is exactly the single-machine model (same seed, same
// scaling, same solver path).
MergedModel train_distributed(const std::vector<WorkerPartition>& partitions,
                              const svm::KernelParams& params, std::uint64_t seed);

svm::Prediction predict_merged(const MergedModel& merged, const SignatureRecord& record);
svm::Prediction predict_merged(const MergedModel& merged, const Eigen::Vector3d& x);

}  // namespace ccdet::dist
