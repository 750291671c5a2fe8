#pragma once

#include "ccdet/svm.hpp"
#include "ccdet/types.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace ccdet::eval {

// Row convention: true overt -> (tn overt, fp covert); true covert -> (fn, tp).
struct ConfusionMatrix {
  std::size_t tn = 0, fp = 0, fn = 0, tp = 0;

  std::size_t total() const { return tn + fp + fn + tp; }
  double sensitivity() const;  // tp / (tp + fn), covert recall
  double specificity() const;  // tn / (tn + fp)
  double accuracy() const;
  double error_rate() const { return 1.0 - accuracy(); }
  // Row percentages for display; each row sums to 100 exactly (before rounding).
  double overt_to_overt_pct() const;
  double overt_to_covert_pct() const;
  double covert_to_overt_pct() const;
  double covert_to_covert_pct() const;
};

// Classifies every record and reduces each block to one verdict by strict
// majority vote (ties fall to overt); record_level instead counts every record
// as its own decision unit.
ConfusionMatrix evaluate(const svm::TrainedModel& model, const std::vector<Block>& test_blocks,
                         bool record_level = false);

enum class NoiseTarget { latency, intervals };
enum class NoiseBasis { std_dev, mean };
std::string to_string(NoiseTarget t);
std::string to_string(NoiseBasis b);
NoiseTarget noise_target_from_string(const std::string& s);
NoiseBasis noise_basis_from_string(const std::string& s);

struct NoiseSpec {
  double fraction = 0.05;                     // noise std as a fraction of the basis
  NoiseTarget target = NoiseTarget::intervals;
  NoiseBasis basis = NoiseBasis::std_dev;
  std::uint64_t seed = 0;
};

struct NoisySeries {
  std::vector<double> values;
  double noise_std = 0.0;
  double snr_db = 0.0;  // 20*log10(signal std / noise std); +inf at fraction 0
};

// Perturbs a copy of the series with zero-mean Gaussian noise whose std is
// spec.fraction times the series' own std (or mean). Errors when the series
// has zero variance, since the resulting SNR would be undefined.
NoisySeries add_noise(const std::vector<double>& series, const NoiseSpec& spec);

// Same perturbation with an externally chosen noise std — used when the scale
// comes from a pooled corpus rather than the series itself (a constant series
// carries no scale of its own).
NoisySeries add_noise_with_std(const std::vector<double>& series, double noise_std,
                               std::uint64_t seed, double signal_std);

// Rebuilds a trace whose inter-arrival intervals have been noise-perturbed
// (timestamps re-accumulated, floored at 1 ms steps); samples keep their
// usage/latency payloads.
Trace with_interval_noise(const Trace& trace, double noise_std_s, std::uint64_t seed);

// First-order baseline score: (1 - x_mean) / x_total, where x_mean is the mean
// interval normalized by the window's largest interval and x_total the count.
double berk_probability(double x_mean, double x_total);
double berk_score(const std::vector<double>& intervals);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;  // overt blocks scored covert
  double tpr = 0.0;  // covert blocks scored covert
};
// ROC of a score vector against block labels, one point per distinct threshold.
std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<TraceLabel>& labels);

// Experiment sizing knobs; per-stage seeds derive from the master seed.
struct EvalConfig {
  std::size_t ref_samples = 10000;    // held-out overt reference
  std::size_t train_samples = 30000;  // per class, per channel
  std::size_t test_samples = 60000;   // per class, per channel
  std::size_t train_size = 2000;      // balanced records fed to the trainer
  double noise_fraction = 0.05;
  std::size_t noise_seeds = 10;
  NoiseTarget noise_target = NoiseTarget::intervals;
  NoiseBasis noise_basis = NoiseBasis::std_dev;
  bool record_level = false;          // count records instead of blocks
  std::uint64_t seed = 0;             // 0 = derive from the master seed

  void validate() const;
};

inline constexpr std::array<std::size_t, 2> kBlockSizes{5000, 200};

struct EvalCell {
  ResourceKind channel = ResourceKind::cpu;
  std::size_t block_size = 0;
  ConfusionMatrix cm;
  double noise_delta_pct = 0.0;  // mean error-rate increase under noise, points
  double mean_snr_db = 0.0;
  std::vector<RocPoint> berk_roc;
};

struct EvalReport {
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  double noise_fraction = 0.05;
  std::size_t noise_seeds = 0;
  std::vector<EvalCell> cells;  // cpu/cache/membus x 5000/200

  double overall_noise_delta_pct() const;
  const EvalCell& cell(ResourceKind channel, std::size_t block_size) const;
};

void write_report_txt(const EvalReport& report, const std::filesystem::path& path);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace ccdet::eval
