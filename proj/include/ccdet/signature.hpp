#pragma once

#include "ccdet/types.hpp"

#include <filesystem>
#include <vector>

namespace ccdet::sig {

// --- Kolmogorov-Smirnov machinery -----------------------------------------
//
// The detector scores each block of intervals by how far its empirical CDF
// strays from a reference distribution of innocent traffic. Both the
// two-sample form (block vs a held-out overt interval sample) and the
// one-sample form (block vs a fitted Gaussian) are supported.

struct KsResult {
  double statistic = 0.0;       // D = sup_x |ECDF_a(x) - F_ref(x)|, in [0,1]
  double critical_value = 0.0;  // threshold at the requested significance
  bool reject = false;          // statistic > critical_value
};

struct ReferenceDistribution {
  enum class Mode { two_sample_overt, fitted_gaussian };
  Mode mode = Mode::two_sample_overt;
  std::vector<double> sample;  // two_sample_overt: sorted overt intervals
  double mean = 0.0;           // fitted_gaussian
  double std = 0.0;            // fitted_gaussian, must be > 0
};

// Asymptotic critical coefficient c(sig) = sqrt(-ln(sig/2)/2); c(0.05) ~ 1.358.
double ks_critical_coefficient(double significance);

// Exact sup-distance between the two empirical CDFs. No size minimums here;
// callers that feed the detector go through ks_statistic, which has them.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// Exact sup-distance between the empirical CDF of a and the N(mean, std^2) CDF.
double ks_gaussian(std::vector<double> a, double mean, double std);

// Reference builders. The empirical reference needs enough mass to be
// meaningful (>= 30 points); the Gaussian fit uses mean and sample std.
ReferenceDistribution make_overt_reference(std::vector<double> overt_intervals);
ReferenceDistribution fit_gaussian_reference(const std::vector<double>& overt_intervals);

// Scores sample_a (>= 5 points) against the reference. Critical value:
// two-sample c(sig)*sqrt((n+m)/(n*m)), one-sample c(sig)/sqrt(n).
KsResult ks_statistic(const std::vector<double>& sample_a, const ReferenceDistribution& reference,
                      double significance);

// --- Signature construction -----------------------------------------------

// Consecutive timestamp differences in seconds. Requires >= 2 strictly
// increasing timestamps.
std::vector<double> intervals(const std::vector<std::int64_t>& timestamps_ms);
std::vector<double> intervals(const Trace& trace);

// (x - mean)/s with the sample (n-1) standard deviation. A constant series
// maps to all zeros rather than NaN.
std::vector<double> zscore(const std::vector<double>& x);

struct SignatureConfig {
  std::size_t block_size = 5000;
  double significance = 0.05;
  bool binarize_ks = false;  // alpha = reject ? 1 : 0 instead of raw D
};

// Splits the trace's interval series into blocks and emits one record per
// interval: alpha = the block's K-S score (stamped on every record in the
// block), beta = the interval z-scored within its block, context = usage
// percent of the sample opening the interval. A final partial block is kept
// only if it still has >= 5 records.
std::vector<Block> build_signature(const Trace& trace, const ReferenceDistribution& reference,
                                   const SignatureConfig& cfg);

std::vector<SignatureRecord> flatten(const std::vector<Block>& blocks);

// Balanced training set: n/2 covert + n/2 overt records. Each class keeps its
// first-encountered members (input order preserved); a class short of n/2 is
// topped up by seeded resampling with replacement, extras appended at the end.
std::vector<SignatureRecord> balance(const std::vector<SignatureRecord>& records, std::size_t n,
                                     std::uint64_t seed);

// --- Dataset files: "alpha,beta,context,label" header + one CSV row/record --

void write_signature_csv(const std::vector<SignatureRecord>& records,
                         const std::filesystem::path& path);
std::vector<SignatureRecord> read_signature_csv(const std::filesystem::path& path);

}  // namespace ccdet::sig
