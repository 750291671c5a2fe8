#pragma once

#include "ccdet/types.hpp"

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

namespace ccdet::svm {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// gamma <= 0 asks the trainer to pick 1/(feature count * feature variance)
// from the scaled training matrix; everywhere else gamma must be positive.
struct KernelParams {
  double gamma = 0.0;
  double box_constraint = 1.0;
  double tolerance = 1e-3;      // KKT slack the solver drives violations below
  std::size_t max_passes = 1000;  // cap on full solver sweeps

  void validate() const;
};

// Per-feature affine normalization captured at training time and replayed at
// prediction time, so decision values stay comparable across datasets. A
// constant feature keeps std 1 and simply centers to zero.
struct FeatureScaling {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d std = Eigen::Vector3d::Ones();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return (x - mean).cwiseQuotient(std);
  }
};

struct TrainedModel {
  FeatureMatrix support_vectors;  // raw (unscaled) feature triples, one row each
  Eigen::VectorXd multipliers;    // strictly positive, <= box constraint
  Eigen::VectorXd labels;         // +1 covert, -1 overt
  double bias = 0.0;
  KernelParams params;            // gamma resolved to its effective value
  FeatureScaling scaling;

  void validate() const;
};

struct Prediction {
  TraceLabel label = TraceLabel::overt;
  double decision_value = 0.0;
};

double rbf_kernel(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double gamma);

// 1/(3 * variance of the flattened matrix); errors when the matrix is constant.
double auto_gamma(const FeatureMatrix& scaled_features);

FeatureMatrix feature_matrix(const std::vector<SignatureRecord>& records);
FeatureScaling fit_scaling(const std::vector<SignatureRecord>& records);

inline double label_value(TraceLabel l) { return l == TraceLabel::covert ? 1.0 : -1.0; }

// Full dual solution, exposed so the margin conditions can be checked per
// training point (not just per support vector).
struct SmoResult {
  Eigen::VectorXd alphas;
  double bias = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
};

// Pairwise working-set optimization of the soft-margin dual over the scaled
// feature rows; y holds +/-1 labels. The seed only varies scan order, never
// the optimum the solver reaches.
SmoResult solve_smo(const FeatureMatrix& scaled_features, const Eigen::VectorXd& y,
                    const KernelParams& params, std::uint64_t seed);

TrainedModel train(const std::vector<SignatureRecord>& records, const KernelParams& params,
                   std::uint64_t seed);
// Variant taking an externally fitted scaling, for trainers that must share
// one normalization across several training subsets.
TrainedModel train_scaled(const std::vector<SignatureRecord>& records,
                          const FeatureScaling& scaling, const KernelParams& params,
                          std::uint64_t seed);

// f(x) = sum_i mult_i * label_i * k(sv_i, x) + bias, evaluated in scaled space.
double decision_value(const TrainedModel& model, const Eigen::Vector3d& x);
Eigen::VectorXd decision_values(const TrainedModel& model, const FeatureMatrix& xs);

Prediction predict(const TrainedModel& model, const Eigen::Vector3d& x);  // covert iff f > 0
Prediction predict(const TrainedModel& model, const SignatureRecord& record);

// Text schema: kernel/bias header, scaling header, then one
// "alpha,label,feature1,feature2,feature3" line per support vector. Doubles
// round-trip exactly, so a reloaded model predicts identically.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace ccdet::svm
