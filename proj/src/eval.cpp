#include "ccdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "ccdet/rng.hpp"
#include "ccdet/text.hpp"

namespace ccdet::eval {

namespace {

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double series_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double series_std(const std::vector<double>& v) {
  const double m = series_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double ConfusionMatrix::sensitivity() const { return safe_ratio(tp, tp + fn); }
double ConfusionMatrix::specificity() const { return safe_ratio(tn, tn + fp); }
double ConfusionMatrix::accuracy() const { return safe_ratio(tn + tp, total()); }
double ConfusionMatrix::overt_to_overt_pct() const { return 100.0 * safe_ratio(tn, tn + fp); }
double ConfusionMatrix::overt_to_covert_pct() const { return 100.0 * safe_ratio(fp, tn + fp); }
double ConfusionMatrix::covert_to_overt_pct() const { return 100.0 * safe_ratio(fn, fn + tp); }
double ConfusionMatrix::covert_to_covert_pct() const { return 100.0 * safe_ratio(tp, fn + tp); }

ConfusionMatrix evaluate(const svm::TrainedModel& model, const std::vector<Block>& test_blocks,
                         bool record_level) {
  if (test_blocks.empty()) throw std::invalid_argument("empty test set: nothing to evaluate");
  ConfusionMatrix cm;
  for (const auto& block : test_blocks) {
    if (block.records.empty())
      throw std::invalid_argument("test block with no records cannot be scored");
    const TraceLabel truth = block.records.front().label;
    for (const auto& r : block.records)
      if (r.label != truth)
        throw std::invalid_argument("test block mixes labels; blocks must be single-source");

    const Eigen::VectorXd f = svm::decision_values(model, svm::feature_matrix(block.records));
    const auto covert_votes =
        static_cast<std::size_t>((f.array() > 0.0).count());

    auto tally = [&](bool predicted_covert, std::size_t weight) {
      if (truth == TraceLabel::overt) {
        (predicted_covert ? cm.fp : cm.tn) += weight;
      } else {
        (predicted_covert ? cm.tp : cm.fn) += weight;
      }
    };
    if (record_level) {
      tally(true, covert_votes);
      tally(false, block.records.size() - covert_votes);
    } else {
      tally(2 * covert_votes > block.records.size(), 1);  // tie stays overt
    }
  }
  return cm;
}

std::string to_string(NoiseTarget t) {
  return t == NoiseTarget::latency ? "latency" : "intervals";
}
std::string to_string(NoiseBasis b) { return b == NoiseBasis::std_dev ? "std" : "mean"; }

NoiseTarget noise_target_from_string(const std::string& s) {
  if (s == "latency") return NoiseTarget::latency;
  if (s == "intervals") return NoiseTarget::intervals;
  throw std::invalid_argument("unknown noise target: '" + s + "'");
}

NoiseBasis noise_basis_from_string(const std::string& s) {
  if (s == "std") return NoiseBasis::std_dev;
  if (s == "mean") return NoiseBasis::mean;
  throw std::invalid_argument("unknown noise basis: '" + s + "'");
}

NoisySeries add_noise_with_std(const std::vector<double>& series, double noise_std,
                               std::uint64_t seed, double signal_std) {
  if (noise_std < 0.0) throw std::invalid_argument("noise std must be >= 0");
  NoisySeries out;
  out.values = series;
  out.noise_std = noise_std;
  if (noise_std == 0.0) {
    out.snr_db = std::numeric_limits<double>::infinity();
    return out;
  }
  auto rng = make_engine(seed);
  std::normal_distribution<double> noise(0.0, noise_std);
  for (double& v : out.values) v += noise(rng);
  out.snr_db = 20.0 * std::log10(signal_std / noise_std);
  return out;
}

NoisySeries add_noise(const std::vector<double>& series, const NoiseSpec& spec) {
  if (!(spec.fraction >= 0.0 && spec.fraction < 1.0))
    throw std::invalid_argument("noise fraction must lie in [0, 1)");
  if (series.size() < 2) throw std::invalid_argument("noise needs at least 2 values");
  const double sd = series_std(series);
  if (!(sd > 0.0))
    throw std::invalid_argument("noise scale undefined on a constant series (zero variance)");
  const double basis = spec.basis == NoiseBasis::std_dev ? sd : series_mean(series);
  if (!(basis > 0.0))
    throw std::invalid_argument("noise basis (series mean) must be positive");
  return add_noise_with_std(series, spec.fraction * basis, spec.seed, sd);
}

Trace with_interval_noise(const Trace& trace, double noise_std_s, std::uint64_t seed) {
  if (trace.samples.size() < 2)
    throw std::invalid_argument("interval noise needs a trace with at least 2 samples");
  std::vector<double> iv;
  iv.reserve(trace.samples.size() - 1);
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    iv.push_back(
        static_cast<double>(trace.samples[i].timestamp_ms - trace.samples[i - 1].timestamp_ms) /
        1000.0);
  const auto noisy = add_noise_with_std(iv, noise_std_s, seed, /*signal_std=*/1.0);

  Trace out = trace;
  for (std::size_t i = 1; i < out.samples.size(); ++i) {
    const auto step = std::max<std::int64_t>(1, std::llround(noisy.values[i - 1] * 1000.0));
    out.samples[i].timestamp_ms = out.samples[i - 1].timestamp_ms + step;
  }
  return out;
}

double berk_probability(double x_mean, double x_total) {
  if (!(x_mean >= 0.0 && x_mean <= 1.0))
    throw std::invalid_argument("normalized mean interval must lie in [0, 1]");
  if (!(x_total >= 1.0)) throw std::invalid_argument("sample count must be >= 1");
  return (1.0 - x_mean) / x_total;
}

double berk_score(const std::vector<double>& intervals) {
  if (intervals.empty()) throw std::invalid_argument("baseline score needs intervals");
  const double max = *std::max_element(intervals.begin(), intervals.end());
  if (!(max > 0.0)) throw std::invalid_argument("baseline score needs positive intervals");
  return berk_probability(series_mean(intervals) / max, static_cast<double>(intervals.size()));
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<TraceLabel>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("roc needs matching non-empty scores and labels");
  std::size_t pos = 0, neg = 0;
  for (auto l : labels) (l == TraceLabel::covert ? pos : neg)++;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc needs both classes present");

  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double thr : thresholds) {
    RocPoint p;
    p.threshold = thr;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= thr) (labels[i] == TraceLabel::covert ? tp : fp)++;
    }
    p.tpr = static_cast<double>(tp) / static_cast<double>(pos);
    p.fpr = static_cast<double>(fp) / static_cast<double>(neg);
    out.push_back(p);
  }
  return out;
}

void EvalConfig::validate() const {
  if (ref_samples < 31) throw std::invalid_argument("eval.ref_samples must be at least 31");
  if (train_samples < kBlockSizes[0] + 1)
    throw std::invalid_argument("eval.train_samples must cover at least one large block");
  if (test_samples < kBlockSizes[0] + 1)
    throw std::invalid_argument("eval.test_samples must cover at least one large block");
  if (train_size < 2 || train_size % 2 != 0)
    throw std::invalid_argument("eval.train_size must be an even count >= 2");
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0))
    throw std::invalid_argument("eval.noise_fraction must lie in [0, 1)");
  if (noise_seeds == 0) throw std::invalid_argument("eval.noise_seeds must be >= 1");
}

double EvalReport::overall_noise_delta_pct() const {
  if (cells.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : cells) sum += c.noise_delta_pct;
  return sum / static_cast<double>(cells.size());
}

const EvalCell& EvalReport::cell(ResourceKind channel, std::size_t block_size) const {
  for (const auto& c : cells)
    if (c.channel == channel && c.block_size == block_size) return c;
  throw std::invalid_argument("no report cell for " + to_string(channel) + "/" +
                         std::to_string(block_size));
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report file for writing: " + path.string());
  out << "channel,block_size,tn,fp,fn,tp,sensitivity,specificity,noise_delta\n";
  for (const auto& c : report.cells) {
    out << to_string(c.channel) << ',' << c.block_size << ',' << c.cm.tn << ',' << c.cm.fp << ','
        << c.cm.fn << ',' << c.cm.tp << ',' << format_double(c.cm.sensitivity()) << ','
        << format_double(c.cm.specificity()) << ',' << format_double(c.noise_delta_pct) << "\n";
  }
  if (!out) throw std::runtime_error("failed while writing report file: " + path.string());
}

namespace {

void write_roc_line(std::ofstream& out, const std::vector<RocPoint>& roc) {
  // Down-sample long curves so the text stays readable.
  const std::size_t max_points = 9;
  const std::size_t stride = roc.size() <= max_points ? 1 : (roc.size() + max_points - 1) / max_points;
  out << "  baseline roc (threshold: fpr, tpr):";
  for (std::size_t i = 0; i < roc.size(); i += stride)
    out << "  " << format_fixed(roc[i].threshold, 4) << ": " << format_fixed(roc[i].fpr, 3) << ", "
        << format_fixed(roc[i].tpr, 3);
  out << "\n";
}

}  // namespace

void write_report_txt(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report file for writing: " + path.string());
  out << "covert-channel detection report\n";
  out << "master seed: " << report.master_seed << "\n";
  out << "workers: " << report.workers << "\n";
  out << "noise: fraction " << format_double(report.noise_fraction) << ", "
      << report.noise_seeds << " seeds\n\n";
  for (const auto& c : report.cells) {
    out << "[" << to_string(c.channel) << "] block size " << c.block_size << " ("
        << c.cm.total() << " decisions: " << c.cm.tn + c.cm.fp << " overt, "
        << c.cm.fn + c.cm.tp << " covert)\n";
    out << "  confusion (% of true-class decisions):\n";
    out << "    true overt : overt " << format_fixed(c.cm.overt_to_overt_pct(), 2) << "  covert "
        << format_fixed(c.cm.overt_to_covert_pct(), 2) << "\n";
    out << "    true covert: overt " << format_fixed(c.cm.covert_to_overt_pct(), 2) << "  covert "
        << format_fixed(c.cm.covert_to_covert_pct(), 2) << "\n";
    out << "  sensitivity " << format_fixed(c.cm.sensitivity(), 4) << "  specificity "
        << format_fixed(c.cm.specificity(), 4) << "  accuracy "
        << format_fixed(c.cm.accuracy(), 4) << "\n";
    out << "  noise delta " << format_fixed(c.noise_delta_pct, 3) << " points (mean SNR "
        << format_fixed(c.mean_snr_db, 2) << " dB)\n";
    if (!c.berk_roc.empty()) write_roc_line(out, c.berk_roc);
    out << "\n";
  }
  out << "overall noise delta: " << format_fixed(report.overall_noise_delta_pct(), 3)
      << " points\n";
  if (!out) throw std::runtime_error("failed while writing report file: " + path.string());
}

}  // namespace ccdet::eval
