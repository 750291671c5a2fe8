#include "ccdet/svm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "ccdet/rng.hpp"
#include "ccdet/text.hpp"

namespace ccdet::svm {

namespace {

constexpr double kSvCutoff = 1e-12;    // below this a multiplier counts as zero
constexpr double kStepEps = 1e-12;     // endpoint-objective comparison slack
constexpr double kProgressEps = 1e-8;  // minimum relative multiplier movement

Eigen::MatrixXd gram_matrix(const FeatureMatrix& x, double gamma) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, x.rows()) + sq.transpose().replicate(x.rows(), 1) -
                       2.0 * (x * x.transpose());
  return (-gamma * d2.cwiseMax(0.0)).array().exp();
}

void check_finite(const FeatureMatrix& x) {
  if (!x.allFinite()) throw std::invalid_argument("training features must be finite");
}

// The SMO state: precomputed Gram matrix, multipliers, bias, and a full error
// cache e_i = f(x_i) - y_i kept exact after every step.
class Solver {
 public:
  Solver(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, const KernelParams& p,
         std::uint64_t seed)
      : k_(k),
        y_(y),
        c_(p.box_constraint),
        tol_(p.tolerance),
        n_(y.size()),
        alpha_(Eigen::VectorXd::Zero(y.size())),
        err_(-y),
        rng_(make_engine(seed)) {}

  SmoResult run(std::size_t max_passes) {
    SmoResult out;
    bool examine_all = true;
    while (out.sweeps < max_passes) {
      ++out.sweeps;
      std::size_t changed = 0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (examine_all || is_unbound(i)) changed += examine(i) ? 1 : 0;
      }
      if (examine_all) {
        if (changed == 0) {
          out.converged = true;
          break;
        }
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
    }
    out.alphas = alpha_;
    out.bias = bias_;
    return out;
  }

 private:
  bool is_unbound(Eigen::Index i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

  bool examine(Eigen::Index i2) {
    const double r2 = err_[i2] * y_[i2];
    const bool violates =
        (r2 < -tol_ && alpha_[i2] < c_) || (r2 > tol_ && alpha_[i2] > 0.0);
    if (!violates) return false;

    // First choice: the unbound point whose cached error is farthest from
    // ours, which maximizes the expected step size.
    Eigen::Index best = -1;
    double best_gap = -1.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (i == i2 || !is_unbound(i)) continue;
      const double gap = std::abs(err_[i] - err_[i2]);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best >= 0 && take_step(best, i2)) return true;

    // Fall back to scanning unbound points, then everything, from a seeded
    // offset so no index is systematically favored.
    const auto start = static_cast<Eigen::Index>(rng_() % static_cast<std::uint64_t>(n_));
    for (Eigen::Index k = 0; k < n_; ++k) {
      const Eigen::Index i1 = (start + k) % n_;
      if (i1 != i2 && is_unbound(i1) && take_step(i1, i2)) return true;
    }
    for (Eigen::Index k = 0; k < n_; ++k) {
      const Eigen::Index i1 = (start + k) % n_;
      if (i1 != i2 && take_step(i1, i2)) return true;
    }
    return false;
  }

  bool take_step(Eigen::Index i1, Eigen::Index i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = err_[i1], e2 = err_[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (s < 0.0) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;

    const double k11 = k_(i1, i1), k12 = k_(i1, i2), k22 = k_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2_new;
    if (eta > 0.0) {
      a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Flat (or concave) direction, which duplicated training points
      // produce; compare the dual objective at both clip endpoints.
      const double f1 = y1 * (e1 + bias_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 + bias_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo);
      const double h1 = a1 + s * (a2 - hi);
      const double obj_lo =
          l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
      const double obj_hi =
          h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
      if (obj_lo < obj_hi - kStepEps)
        a2_new = lo;
      else if (obj_lo > obj_hi + kStepEps)
        a2_new = hi;
      else
        return false;
    }
    if (std::abs(a2_new - a2) < kProgressEps * (a2_new + a2 + kProgressEps)) return false;

    // The constraint-line arithmetic can leave 1e-18-scale dust just outside
    // the box; snap it onto the bounds so multipliers stay feasible exactly.
    double a1_new = a1 + s * (a2 - a2_new);
    if (a1_new < 1e-12) a1_new = 0.0;
    else if (a1_new > c_ - 1e-12) a1_new = c_;
    const double d1 = y1 * (a1_new - a1);
    const double d2 = y2 * (a2_new - a2);

    const double b1 = bias_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = bias_ - e2 - d1 * k12 - d2 * k22;
    double b_new;
    if (a1_new > 0.0 && a1_new < c_)
      b_new = b1;
    else if (a2_new > 0.0 && a2_new < c_)
      b_new = b2;
    else
      b_new = 0.5 * (b1 + b2);

    err_ += d1 * k_.col(i1) + d2 * k_.col(i2);
    err_.array() += b_new - bias_;
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    bias_ = b_new;
    return true;
  }

  const Eigen::MatrixXd& k_;
  const Eigen::VectorXd& y_;
  const double c_;
  const double tol_;
  const Eigen::Index n_;
  Eigen::VectorXd alpha_;
  double bias_ = 0.0;
  Eigen::VectorXd err_;
  std::mt19937_64 rng_;
};

}  // namespace

void KernelParams::validate() const {
  if (gamma < 0.0) throw std::invalid_argument("svm.gamma must be >= 0 (0 = pick automatically)");
  if (!(box_constraint > 0.0)) throw std::invalid_argument("svm.box_constraint must be > 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("svm.tolerance must be > 0");
  if (max_passes == 0) throw std::invalid_argument("svm.max_passes must be >= 1");
}

void TrainedModel::validate() const {
  params.validate();
  if (!(params.gamma > 0.0))
    throw std::invalid_argument("model gamma must be resolved to a positive value");
  if (support_vectors.rows() != multipliers.size() || support_vectors.rows() != labels.size())
    throw std::invalid_argument("model support vectors, multipliers and labels must align");
  for (Eigen::Index i = 0; i < multipliers.size(); ++i) {
    if (!(multipliers[i] > 0.0) || multipliers[i] > params.box_constraint * (1.0 + 1e-9))
      throw std::invalid_argument("model multipliers must lie in (0, C]");
    if (labels[i] != 1.0 && labels[i] != -1.0)
      throw std::invalid_argument("model labels must be +1 or -1");
  }
  for (int j = 0; j < 3; ++j)
    if (!(scaling.std[j] > 0.0))
      throw std::invalid_argument("model feature scaling stds must be > 0");
}

double rbf_kernel(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("rbf gamma must be > 0");
  return std::exp(-gamma * (a - b).squaredNorm());
}

double auto_gamma(const FeatureMatrix& scaled_features) {
  if (scaled_features.rows() < 2)
    throw std::invalid_argument("auto gamma needs at least 2 feature rows");
  const double mean = scaled_features.mean();
  const double var = (scaled_features.array() - mean).square().mean();
  if (!(var > 0.0)) throw std::invalid_argument("auto gamma undefined: features are constant");
  return 1.0 / (3.0 * var);
}

FeatureMatrix feature_matrix(const std::vector<SignatureRecord>& records) {
  FeatureMatrix x(static_cast<Eigen::Index>(records.size()), 3);
  for (std::size_t i = 0; i < records.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = to_feature(records[i]).transpose();
  return x;
}

FeatureScaling fit_scaling(const std::vector<SignatureRecord>& records) {
  if (records.size() < 2) throw std::invalid_argument("scaling fit needs at least 2 records");
  const FeatureMatrix x = feature_matrix(records);
  check_finite(x);
  FeatureScaling s;
  s.mean = x.colwise().mean();
  for (int j = 0; j < 3; ++j) {
    const double ss = (x.col(j).array() - s.mean[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(x.rows() - 1));
    s.std[j] = sd > 0.0 ? sd : 1.0;  // constant feature: center only
  }
  return s;
}

SmoResult solve_smo(const FeatureMatrix& scaled_features, const Eigen::VectorXd& y,
                    const KernelParams& params, std::uint64_t seed) {
  params.validate();
  if (!(params.gamma > 0.0)) throw std::invalid_argument("solve_smo needs a resolved gamma > 0");
  if (scaled_features.rows() != y.size())
    throw std::invalid_argument("feature rows and labels must align");
  if (y.size() < 2) throw std::invalid_argument("training needs at least 2 records");
  check_finite(scaled_features);
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0) has_pos = true;
    else if (y[i] == -1.0) has_neg = true;
    else throw std::invalid_argument("labels must be +1 or -1");
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("training needs both classes present");

  const Eigen::MatrixXd k = gram_matrix(scaled_features, params.gamma);
  return Solver(k, y, params, seed).run(params.max_passes);
}

TrainedModel train(const std::vector<SignatureRecord>& records, const KernelParams& params,
                   std::uint64_t seed) {
  return train_scaled(records, fit_scaling(records), params, seed);
}

TrainedModel train_scaled(const std::vector<SignatureRecord>& records,
                          const FeatureScaling& scaling, const KernelParams& params,
                          std::uint64_t seed) {
  params.validate();
  const FeatureMatrix raw = feature_matrix(records);
  check_finite(raw);

  FeatureMatrix scaled(raw.rows(), 3);
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    scaled.row(i) = scaling.apply(raw.row(i).transpose()).transpose();

  Eigen::VectorXd y(raw.rows());
  for (std::size_t i = 0; i < records.size(); ++i)
    y[static_cast<Eigen::Index>(i)] = label_value(records[i].label);

  KernelParams resolved = params;
  if (!(resolved.gamma > 0.0)) resolved.gamma = auto_gamma(scaled);

  const SmoResult smo = solve_smo(scaled, y, resolved, seed);

  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < smo.alphas.size(); ++i)
    if (smo.alphas[i] > kSvCutoff) sv.push_back(i);
  if (sv.empty()) throw std::runtime_error("training produced no support vectors");

  TrainedModel model;
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), 3);
  model.multipliers.resize(static_cast<Eigen::Index>(sv.size()));
  model.labels.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t i = 0; i < sv.size(); ++i) {
    model.support_vectors.row(static_cast<Eigen::Index>(i)) = raw.row(sv[i]);
    model.multipliers[static_cast<Eigen::Index>(i)] = smo.alphas[sv[i]];
    model.labels[static_cast<Eigen::Index>(i)] = y[sv[i]];
  }
  model.bias = smo.bias;
  model.params = resolved;
  model.scaling = scaling;
  model.validate();
  return model;
}

Eigen::VectorXd decision_values(const TrainedModel& model, const FeatureMatrix& xs) {
  model.validate();
  if (model.support_vectors.rows() == 0)
    throw std::invalid_argument("model has no support vectors");

  FeatureMatrix sv_scaled(model.support_vectors.rows(), 3);
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
    sv_scaled.row(i) = model.scaling.apply(model.support_vectors.row(i).transpose()).transpose();
  FeatureMatrix x_scaled(xs.rows(), 3);
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    x_scaled.row(i) = model.scaling.apply(xs.row(i).transpose()).transpose();

  const Eigen::VectorXd sv_sq = sv_scaled.rowwise().squaredNorm();
  const Eigen::VectorXd x_sq = x_scaled.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = x_sq.replicate(1, sv_scaled.rows()) +
                       sv_sq.transpose().replicate(x_scaled.rows(), 1) -
                       2.0 * (x_scaled * sv_scaled.transpose());
  const Eigen::MatrixXd k = (-model.params.gamma * d2.cwiseMax(0.0)).array().exp();
  const Eigen::VectorXd w = model.multipliers.cwiseProduct(model.labels);
  return (k * w).array() + model.bias;
}

double decision_value(const TrainedModel& model, const Eigen::Vector3d& x) {
  FeatureMatrix xs(1, 3);
  xs.row(0) = x.transpose();
  return decision_values(model, xs)[0];
}

Prediction predict(const TrainedModel& model, const Eigen::Vector3d& x) {
  Prediction p;
  p.decision_value = decision_value(model, x);
  p.label = p.decision_value > 0.0 ? TraceLabel::covert : TraceLabel::overt;
  return p;
}

Prediction predict(const TrainedModel& model, const SignatureRecord& record) {
  return predict(model, to_feature(record));
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path.string());
  out << "# model gamma=" << format_double(model.params.gamma)
      << " C=" << format_double(model.params.box_constraint)
      << " bias=" << format_double(model.bias) << "\n";
  out << "# scale mean=" << format_double(model.scaling.mean[0]) << ','
      << format_double(model.scaling.mean[1]) << ',' << format_double(model.scaling.mean[2])
      << " std=" << format_double(model.scaling.std[0]) << ','
      << format_double(model.scaling.std[1]) << ',' << format_double(model.scaling.std[2])
      << "\n";
  out << "alpha,label,feature1,feature2,feature3\n";
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    out << format_double(model.multipliers[i]) << ','
        << (model.labels[i] > 0.0 ? "1" : "-1") << ','
        << format_double(model.support_vectors(i, 0)) << ','
        << format_double(model.support_vectors(i, 1)) << ','
        << format_double(model.support_vectors(i, 2)) << "\n";
  }
  if (!out) throw std::runtime_error("failed while writing model file: " + path.string());
}

namespace {

std::string_view expect_model_kv(const std::filesystem::path& path, std::size_t line_no,
                                 std::string_view field, std::string_view key) {
  if (field.size() < key.size() + 1 || field.substr(0, key.size()) != key ||
      field[key.size()] != '=')
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected '" +
                             std::string(key) + "=<value>'");
  return field.substr(key.size() + 1);
}

Eigen::Vector3d parse_triple(const std::filesystem::path& path, std::size_t line_no,
                             std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3)
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                             ": expected 3 comma-separated values");
  return {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
}

}  // namespace

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path.string());
  std::string line;
  TrainedModel model;
  std::size_t at_line = 1;  // where a value parse error should be reported
  try {
    if (!std::getline(in, line) || line.rfind("# model ", 0) != 0)
      throw std::runtime_error(path.string() + ":1: expected '# model ...' header");
    std::string header = line.substr(8);  // keep alive: split() returns views into it
    auto fields = split(trim(header), ' ');
    if (fields.size() != 3)
      throw std::runtime_error(path.string() + ":1: expected gamma, C and bias fields");
    model.params.gamma = parse_double(expect_model_kv(path, 1, fields[0], "gamma"));
    model.params.box_constraint = parse_double(expect_model_kv(path, 1, fields[1], "C"));
    model.bias = parse_double(expect_model_kv(path, 1, fields[2], "bias"));

    at_line = 2;
    if (!std::getline(in, line) || line.rfind("# scale ", 0) != 0)
      throw std::runtime_error(path.string() + ":2: expected '# scale ...' header");
    header = line.substr(8);
    fields = split(trim(header), ' ');
    if (fields.size() != 2)
      throw std::runtime_error(path.string() + ":2: expected mean and std fields");
    model.scaling.mean = parse_triple(path, 2, expect_model_kv(path, 2, fields[0], "mean"));
    model.scaling.std = parse_triple(path, 2, expect_model_kv(path, 2, fields[1], "std"));

    if (!std::getline(in, line) || trim(line) != "alpha,label,feature1,feature2,feature3")
      throw std::runtime_error(path.string() +
                               ":3: expected header 'alpha,label,feature1,feature2,feature3'");

    std::vector<double> mult, lab;
    std::vector<Eigen::Vector3d> sv;
    std::size_t line_no = 3;
    while (std::getline(in, line)) {
      ++line_no;
      at_line = line_no;
      auto row = trim(line);
      if (row.empty()) continue;
      auto cols = split(row, ',');
      if (cols.size() != 5)
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": expected 5 comma-separated columns");
      mult.push_back(parse_double(cols[0]));
      lab.push_back(parse_double(cols[1]));
      sv.emplace_back(parse_double(cols[2]), parse_double(cols[3]), parse_double(cols[4]));
    }
    model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), 3);
    model.multipliers.resize(static_cast<Eigen::Index>(sv.size()));
    model.labels.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t i = 0; i < sv.size(); ++i) {
      model.support_vectors.row(static_cast<Eigen::Index>(i)) = sv[i].transpose();
      model.multipliers[static_cast<Eigen::Index>(i)] = mult[i];
      model.labels[static_cast<Eigen::Index>(i)] = lab[i];
    }
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ":" + std::to_string(at_line) + ": " + e.what());
  }
  model.validate();
  return model;
}

}  // namespace ccdet::svm
