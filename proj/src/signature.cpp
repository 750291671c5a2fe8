#include "ccdet/signature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "ccdet/rng.hpp"
#include "ccdet/text.hpp"

namespace ccdet::sig {

namespace {

double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sample (n-1) standard deviation.
double sample_std(const std::vector<double>& x, double mean) {
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double gaussian_cdf(double x, double mean, double std) {
  return 0.5 * std::erfc(-(x - mean) / (std * std::numbers::sqrt2));
}

}  // namespace

double ks_critical_coefficient(double significance) {
  if (!(significance > 0.0 && significance < 1.0))
    throw std::invalid_argument("significance must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(significance / 2.0));
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("K-S needs non-empty samples on both sides");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto n = a.size();
  const auto m = b.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Walk the pooled order; at each distinct value consume every tied point
  // from both sides before comparing the step heights.
  while (i < n && j < m) {
    const double x = std::min(a[i], b[j]);
    while (i < n && a[i] == x) ++i;
    while (j < m && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(n) -
                             static_cast<double>(j) / static_cast<double>(m)));
  }
  return d;
}

double ks_gaussian(std::vector<double> a, double mean, double std) {
  if (a.empty()) throw std::invalid_argument("K-S needs a non-empty sample");
  if (!(std > 0.0)) throw std::invalid_argument("Gaussian reference needs std > 0");
  std::sort(a.begin(), a.end());
  const auto n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = gaussian_cdf(a[i], mean, std);
    // The ECDF jumps from i/n to (i+1)/n at a[i]; the sup against a continuous
    // CDF is attained just before or at a jump.
    d = std::max({d, std::abs((static_cast<double>(i) + 1.0) / n - f),
                  std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

ReferenceDistribution make_overt_reference(std::vector<double> overt_intervals) {
  if (overt_intervals.size() < 30)
    throw std::invalid_argument("empirical reference needs at least 30 intervals, got " +
                                std::to_string(overt_intervals.size()));
  std::sort(overt_intervals.begin(), overt_intervals.end());
  ReferenceDistribution ref;
  ref.mode = ReferenceDistribution::Mode::two_sample_overt;
  ref.sample = std::move(overt_intervals);
  return ref;
}

ReferenceDistribution fit_gaussian_reference(const std::vector<double>& overt_intervals) {
  if (overt_intervals.size() < 2)
    throw std::invalid_argument("Gaussian reference fit needs at least 2 intervals");
  ReferenceDistribution ref;
  ref.mode = ReferenceDistribution::Mode::fitted_gaussian;
  ref.mean = mean_of(overt_intervals);
  ref.std = sample_std(overt_intervals, ref.mean);
  if (!(ref.std > 0.0))
    throw std::invalid_argument("Gaussian reference fit degenerate: interval series is constant");
  return ref;
}

KsResult ks_statistic(const std::vector<double>& sample_a, const ReferenceDistribution& reference,
                      double significance) {
  if (sample_a.size() < 5)
    throw std::invalid_argument("K-S sample too small: need at least 5 points, got " +
                                std::to_string(sample_a.size()));
  const double c = ks_critical_coefficient(significance);
  const auto n = static_cast<double>(sample_a.size());
  KsResult r;
  if (reference.mode == ReferenceDistribution::Mode::two_sample_overt) {
    if (reference.sample.empty())
      throw std::invalid_argument("degenerate reference: empirical sample is empty");
    const auto m = static_cast<double>(reference.sample.size());
    r.statistic = ks_two_sample(sample_a, reference.sample);
    r.critical_value = c * std::sqrt((n + m) / (n * m));
  } else {
    if (!(reference.std > 0.0))
      throw std::invalid_argument("degenerate reference: Gaussian std must be > 0");
    r.statistic = ks_gaussian(sample_a, reference.mean, reference.std);
    r.critical_value = c / std::sqrt(n);
  }
  r.reject = r.statistic > r.critical_value;
  return r;
}

std::vector<double> intervals(const std::vector<std::int64_t>& timestamps_ms) {
  if (timestamps_ms.size() < 2)
    throw std::invalid_argument("interval extraction needs at least 2 timestamps");
  std::vector<double> out;
  out.reserve(timestamps_ms.size() - 1);
  for (std::size_t i = 1; i < timestamps_ms.size(); ++i) {
    if (timestamps_ms[i] <= timestamps_ms[i - 1])
      throw std::invalid_argument("timestamps must be strictly increasing (position " +
                                  std::to_string(i) + ")");
    out.push_back(static_cast<double>(timestamps_ms[i] - timestamps_ms[i - 1]) / 1000.0);
  }
  return out;
}

std::vector<double> intervals(const Trace& trace) {
  std::vector<std::int64_t> ts;
  ts.reserve(trace.samples.size());
  for (const auto& s : trace.samples) ts.push_back(s.timestamp_ms);
  return intervals(ts);
}

std::vector<double> zscore(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("z-score needs at least 2 values");
  const double mean = mean_of(x);
  const double s = sample_std(x, mean);
  std::vector<double> out(x.size(), 0.0);
  if (s > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / s;
  return out;
}

std::vector<Block> build_signature(const Trace& trace, const ReferenceDistribution& reference,
                                   const SignatureConfig& cfg) {
  if (cfg.block_size < 5)
    throw std::invalid_argument("block_size must be at least 5, got " +
                                std::to_string(cfg.block_size));
  if (trace.samples.size() < cfg.block_size + 1)
    throw std::invalid_argument("trace too short for block_size " +
                                std::to_string(cfg.block_size) + ": need at least " +
                                std::to_string(cfg.block_size + 1) + " samples, got " +
                                std::to_string(trace.samples.size()));
  const auto iv = intervals(trace);

  std::vector<Block> blocks;
  for (std::size_t lo = 0; lo < iv.size(); lo += cfg.block_size) {
    const std::size_t hi = std::min(lo + cfg.block_size, iv.size());
    if (hi - lo < 5) break;  // trailing remnant too small to score
    const std::vector<double> chunk(iv.begin() + static_cast<std::ptrdiff_t>(lo),
                                    iv.begin() + static_cast<std::ptrdiff_t>(hi));
    const KsResult ks = ks_statistic(chunk, reference, cfg.significance);
    const double alpha = cfg.binarize_ks ? (ks.reject ? 1.0 : 0.0) : ks.statistic;
    const auto betas = zscore(chunk);

    Block block;
    block.block_size = cfg.block_size;
    block.records.reserve(chunk.size());
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      SignatureRecord rec;
      rec.alpha = alpha;
      rec.beta = betas[k];
      rec.context = trace.samples[lo + k].usage;  // sample opening interval k
      rec.label = trace.label;
      block.records.push_back(rec);
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

std::vector<SignatureRecord> flatten(const std::vector<Block>& blocks) {
  std::vector<SignatureRecord> out;
  for (const auto& b : blocks) out.insert(out.end(), b.records.begin(), b.records.end());
  return out;
}

std::vector<SignatureRecord> balance(const std::vector<SignatureRecord>& records, std::size_t n,
                                     std::uint64_t seed) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("balanced set size must be an even count >= 2, got " +
                                std::to_string(n));
  std::vector<const SignatureRecord*> covert, overt;
  for (const auto& r : records)
    (r.label == TraceLabel::covert ? covert : overt).push_back(&r);
  if (covert.empty()) throw std::invalid_argument("cannot balance: no covert records");
  if (overt.empty()) throw std::invalid_argument("cannot balance: no overt records");

  const std::size_t half = n / 2;
  std::vector<SignatureRecord> out;
  out.reserve(n);

  // First pass keeps the earliest half of each class without disturbing the
  // original interleaving, so an already-balanced input passes through intact.
  std::size_t kept_covert = 0, kept_overt = 0;
  for (const auto& r : records) {
    auto& kept = (r.label == TraceLabel::covert) ? kept_covert : kept_overt;
    if (kept < half) {
      out.push_back(r);
      ++kept;
    }
  }

  auto rng = make_engine(seed);
  auto top_up = [&](const std::vector<const SignatureRecord*>& pool, std::size_t kept) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t k = kept; k < half; ++k) out.push_back(*pool[pick(rng)]);
  };
  top_up(covert, kept_covert);
  top_up(overt, kept_overt);
  return out;
}

void write_signature_csv(const std::vector<SignatureRecord>& records,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open signature file for writing: " + path.string());
  out << "alpha,beta,context,label\n";
  for (const auto& r : records)
    out << format_double(r.alpha) << ',' << format_double(r.beta) << ','
        << format_double(r.context) << ',' << to_string(r.label) << "\n";
  if (!out) throw std::runtime_error("failed while writing signature file: " + path.string());
}

std::vector<SignatureRecord> read_signature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open signature file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || trim(line) != "alpha,beta,context,label")
    throw std::runtime_error(path.string() + ":1: expected header 'alpha,beta,context,label'");
  ++line_no;
  std::vector<SignatureRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    auto row = trim(line);
    if (row.empty()) continue;
    auto cols = split(row, ',');
    if (cols.size() != 4)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 4 comma-separated columns");
    SignatureRecord r;
    try {
      r.alpha = parse_double(cols[0]);
      r.beta = parse_double(cols[1]);
      r.context = parse_double(cols[2]);
      r.label = trace_label_from_string(std::string(cols[3]));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace ccdet::sig
