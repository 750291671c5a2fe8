#include "ccdet/distributed.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ccdet/rng.hpp"

namespace ccdet::dist {

std::vector<WorkerPartition> partition(const std::vector<SignatureRecord>& records, std::size_t m,
                                       std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("worker count must be >= 1");
  if (m > records.size() / 2)
    throw std::invalid_argument("worker count " + std::to_string(m) +
                                " exceeds available record pairs (" +
                                std::to_string(records.size() / 2) + ")");

  std::vector<const SignatureRecord*> covert, overt;
  for (const auto& r : records)
    (r.label == TraceLabel::covert ? covert : overt).push_back(&r);
  if (covert.size() != overt.size())
    throw std::invalid_argument("records must be class-balanced before partitioning (" +
                                std::to_string(covert.size()) + " covert vs " +
                                std::to_string(overt.size()) + " overt)");
  if (covert.empty()) throw std::invalid_argument("cannot partition an empty record set");

  if (m == 1) return {WorkerPartition{1, records}};

  auto rng = make_engine(seed);
  std::shuffle(covert.begin(), covert.end(), rng);
  std::shuffle(overt.begin(), overt.end(), rng);

  std::vector<WorkerPartition> parts(m);
  for (std::size_t w = 0; w < m; ++w) parts[w].worker_id = w + 1;
  // Dealing both classes with the same stride keeps every partition balanced.
  for (std::size_t i = 0; i < covert.size(); ++i) {
    auto& p = parts[i % m];
    p.records.push_back(*covert[i]);
    p.records.push_back(*overt[i]);
  }
  return parts;
}

MergedModel train_distributed(const std::vector<WorkerPartition>& partitions,
                              const svm::KernelParams& params, std::uint64_t seed) {
  params.validate();
  if (partitions.empty()) throw std::invalid_argument("no worker partitions to train on");

  // Merge arithmetic must not depend on the order partitions arrive in.
  std::vector<const WorkerPartition*> ordered;
  ordered.reserve(partitions.size());
  for (const auto& p : partitions) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const WorkerPartition* a, const WorkerPartition* b) {
              return a->worker_id < b->worker_id;
            });
  for (std::size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i]->worker_id == ordered[i - 1]->worker_id)
      throw std::invalid_argument("duplicate worker_id " +
                                  std::to_string(ordered[i]->worker_id));

  // Every worker normalizes with the same scaling and kernel width, fitted
  // over the full record set, so their decision functions are commensurable.
  std::vector<SignatureRecord> all;
  for (const auto* p : ordered)
    all.insert(all.end(), p->records.begin(), p->records.end());
  const svm::FeatureScaling scaling = svm::fit_scaling(all);

  svm::KernelParams resolved = params;
  if (!(resolved.gamma > 0.0)) {
    svm::FeatureMatrix scaled(static_cast<Eigen::Index>(all.size()), 3);
    const svm::FeatureMatrix raw = svm::feature_matrix(all);
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      scaled.row(i) = scaling.apply(raw.row(i).transpose()).transpose();
    resolved.gamma = svm::auto_gamma(scaled);
  }

  const bool single = ordered.size() == 1;
  std::vector<svm::TrainedModel> locals;
  locals.reserve(ordered.size());
  for (const auto* p : ordered) {
    const std::uint64_t wseed = single ? seed : derive_seed(seed, "worker", p->worker_id);
    try {
      locals.push_back(svm::train_scaled(p->records, scaling, resolved, wseed));
    } catch (const std::exception& e) {
      throw std::runtime_error("worker " + std::to_string(p->worker_id) +
                               " failed to train: " + e.what());
    }
  }

  MergedModel merged;
  Eigen::Index total = 0;
  for (const auto& l : locals) total += l.support_vectors.rows();
  merged.model.support_vectors.resize(total, 3);
  merged.model.multipliers.resize(total);
  merged.model.labels.resize(total);
  merged.provenance.reserve(static_cast<std::size_t>(total));

  Eigen::Index at = 0;
  double bias_sum = 0.0;
  for (std::size_t w = 0; w < locals.size(); ++w) {
    const auto& l = locals[w];
    const Eigen::Index n = l.support_vectors.rows();
    merged.model.support_vectors.middleRows(at, n) = l.support_vectors;
    merged.model.multipliers.segment(at, n) = l.multipliers;
    merged.model.labels.segment(at, n) = l.labels;
    for (Eigen::Index i = 0; i < n; ++i) merged.provenance.push_back(ordered[w]->worker_id);
    merged.worker_biases.push_back(l.bias);
    bias_sum += l.bias;
    at += n;
  }
  merged.model.bias = bias_sum / static_cast<double>(locals.size());
  merged.model.params = resolved;
  merged.model.scaling = scaling;
  merged.model.validate();
  merged.worker_models = std::move(locals);
  return merged;
}

svm::Prediction predict_merged(const MergedModel& merged, const SignatureRecord& record) {
  return svm::predict(merged.model, record);
}

svm::Prediction predict_merged(const MergedModel& merged, const Eigen::Vector3d& x) {
  return svm::predict(merged.model, x);
}

}  // namespace ccdet::dist
