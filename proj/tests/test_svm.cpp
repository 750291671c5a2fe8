#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "ccdet/rng.hpp"
#include "ccdet/svm.hpp"

using namespace ccdet;
using namespace ccdet::svm;

namespace {

// Two well-separated clusters in feature space, labels interleaved.
std::vector<SignatureRecord> cluster_set(std::size_t n, std::uint64_t seed, double spread = 0.02) {
  auto rng = make_engine(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<SignatureRecord> records;
  for (std::size_t i = 0; i < n / 2; ++i) {
    records.push_back({std::clamp(0.95 + noise(rng), 0.0, 1.0), 0.5 + noise(rng),
                       std::clamp(80.0 + 40.0 * noise(rng), 0.0, 100.0), TraceLabel::covert});
    records.push_back({std::clamp(0.05 + noise(rng), 0.0, 1.0), -0.5 + noise(rng),
                       std::clamp(20.0 + 40.0 * noise(rng), 0.0, 100.0), TraceLabel::overt});
  }
  return records;
}

double training_accuracy(const TrainedModel& model, const std::vector<SignatureRecord>& records) {
  std::size_t correct = 0;
  for (const auto& r : records)
    if (predict(model, r).label == r.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

}  // namespace

TEST_CASE("rbf kernel values on hand-checkable inputs") {
  const Eigen::Vector3d a{0.3, -1.2, 55.0};
  CHECK(rbf_kernel(a, a, 0.7) == doctest::Approx(1.0));

  const Eigen::Vector3d b{1.3, -1.2, 55.0};  // squared distance exactly 1
  CHECK(rbf_kernel(a, b, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  auto rng = make_engine(1);
  std::normal_distribution<double> d(0.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d u{d(rng), d(rng), d(rng)}, v{d(rng), d(rng), d(rng)};
    CHECK(rbf_kernel(u, v, 0.5) == rbf_kernel(v, u, 0.5));
    CHECK(rbf_kernel(u, v, 0.5) > 0.0);
    CHECK(rbf_kernel(u, v, 0.5) <= 1.0);
  }
  CHECK_THROWS_AS(rbf_kernel(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("a minimal two-point problem trains to two support vectors") {
  const std::vector<SignatureRecord> records{{0.9, 1.0, 90.0, TraceLabel::covert},
                                             {0.1, -1.0, 10.0, TraceLabel::overt}};
  const auto model = train(records, KernelParams{}, 7);
  CHECK(model.support_vectors.rows() == 2);
  CHECK(predict(model, records[0]).label == TraceLabel::covert);
  CHECK(predict(model, records[1]).label == TraceLabel::overt);
  CHECK(predict(model, records[0]).decision_value > 0.0);
  CHECK(predict(model, records[1]).decision_value < 0.0);
}

TEST_CASE("a separable 200-point set reaches 100% training accuracy") {
  const auto records = cluster_set(200, 42);
  const auto model = train(records, KernelParams{}, 11);
  CHECK(training_accuracy(model, records) == 1.0);
  CHECK(model.params.gamma > 0.0);  // auto gamma resolved
}

TEST_CASE("the rbf kernel separates an xor pattern no linear rule can") {
  std::vector<SignatureRecord> records{{0.0, 0.0, 50.0, TraceLabel::covert},
                                       {1.0, 1.0, 50.0, TraceLabel::covert},
                                       {0.0, 1.0, 50.0, TraceLabel::overt},
                                       {1.0, 0.0, 50.0, TraceLabel::overt}};
  KernelParams params;
  params.gamma = 4.0;
  params.box_constraint = 100.0;  // hard-margin-ish so the pattern must be fit
  const auto model = train(records, params, 3);
  for (const auto& r : records) {
    const auto p = predict(model, r);
    CHECK(p.label == r.label);
  }
}

TEST_CASE("the dual solution satisfies the margin conditions point by point") {
  const auto records = cluster_set(120, 9);
  const auto scaling = fit_scaling(records);
  FeatureMatrix scaled(static_cast<Eigen::Index>(records.size()), 3);
  Eigen::VectorXd y(scaled.rows());
  for (std::size_t i = 0; i < records.size(); ++i) {
    scaled.row(static_cast<Eigen::Index>(i)) =
        scaling.apply(to_feature(records[i])).transpose();
    y[static_cast<Eigen::Index>(i)] = label_value(records[i].label);
  }
  KernelParams params;
  params.gamma = 0.5;
  const auto smo = solve_smo(scaled, y, params, 5);
  REQUIRE(smo.converged);

  // Dual feasibility: multipliers in box, sum alpha_i y_i == 0.
  CHECK(std::abs(smo.alphas.dot(y)) <= 1e-9);
  for (Eigen::Index i = 0; i < smo.alphas.size(); ++i) {
    CHECK(smo.alphas[i] >= 0.0);
    CHECK(smo.alphas[i] <= params.box_constraint * (1.0 + 1e-12));
  }

  // KKT: per-point margin condition for the point's multiplier regime.
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
    double f = smo.bias;
    for (Eigen::Index j = 0; j < scaled.rows(); ++j)
      f += smo.alphas[j] * y[j] *
           rbf_kernel(scaled.row(j).transpose(), scaled.row(i).transpose(), params.gamma);
    const double margin = y[i] * f;
    const double tol = params.tolerance + 1e-9;
    if (smo.alphas[i] <= 1e-12) {
      CHECK(margin >= 1.0 - tol);
    } else if (smo.alphas[i] >= params.box_constraint - 1e-12) {
      CHECK(margin <= 1.0 + tol);
    } else {
      CHECK(margin == doctest::Approx(1.0).epsilon(tol));
    }
  }
}

TEST_CASE("training is deterministic and order-independent on the decision function") {
  auto records = cluster_set(160, 13);
  KernelParams params;
  params.tolerance = 1e-6;
  const auto a = train(records, params, 21);
  const auto b = train(records, params, 21);
  // Identical input and seed: identical solver path, identical model.
  CHECK((a.support_vectors.array() == b.support_vectors.array()).all());
  CHECK((a.multipliers.array() == b.multipliers.array()).all());
  CHECK(a.bias == b.bias);

  auto shuffled = records;
  std::shuffle(shuffled.begin(), shuffled.end(), make_engine(77));
  const auto c = train(shuffled, params, 21);

  auto rng = make_engine(14);
  std::uniform_real_distribution<double> ua(0.0, 1.0), ub(-2.0, 2.0), uc(0.0, 100.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d x{ua(rng), ub(rng), uc(rng)};
    worst = std::max(worst, std::abs(decision_value(a, x) - decision_value(c, x)));
    CHECK(predict(a, x).label == predict(c, x).label);
  }
  CHECK(worst <= 1e-4);  // same optimum up to solver tolerance
}

TEST_CASE("raising the box constraint never hurts separable training accuracy") {
  const auto records = cluster_set(100, 17);
  double prev = -1.0;
  for (double c : {0.01, 1.0, 100.0}) {
    KernelParams params;
    params.box_constraint = c;
    params.gamma = 0.5;
    const auto model = train(records, params, 5);
    const double acc = training_accuracy(model, records);
    CHECK(acc >= prev);
    prev = acc;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("models survive a save/load round trip with identical predictions") {
  const auto records = cluster_set(80, 23, 0.15);  // noisier set: non-trivial multipliers
  const auto model = train(records, KernelParams{}, 31);
  const auto path = std::filesystem::temp_directory_path() / "ccdet-model-roundtrip.txt";
  save_model(model, path);
  const auto back = load_model(path);
  std::filesystem::remove(path);

  CHECK(back.params.gamma == model.params.gamma);
  CHECK(back.bias == model.bias);
  CHECK((back.support_vectors.array() == model.support_vectors.array()).all());
  CHECK((back.multipliers.array() == model.multipliers.array()).all());
  CHECK((back.scaling.mean.array() == model.scaling.mean.array()).all());
  CHECK((back.scaling.std.array() == model.scaling.std.array()).all());

  auto rng = make_engine(37);
  std::uniform_real_distribution<double> ua(0.0, 1.0), ub(-3.0, 3.0), uc(0.0, 100.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d x{ua(rng), ub(rng), uc(rng)};
    CHECK(decision_value(back, x) == decision_value(model, x));
  }
}

TEST_CASE("corrupt model files are rejected with the failing location") {
  const auto path = std::filesystem::temp_directory_path() / "ccdet-model-corrupt.txt";
  {
    std::ofstream out(path);
    out << "# model gamma=0.5 C=1 bias=0\n"
        << "# scale mean=0,0,0 std=1,1,1\n"
        << "alpha,label,feature1,feature2,feature3\n"
        << "0.5,1,0.1,oops,50\n";
  }
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains(":4"), std::runtime_error);
  {
    std::ofstream out(path);
    out << "gamma 0.5\n";
  }
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains(":1"), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(std::filesystem::path("/no/such/ccdet-model.txt")),
                  std::runtime_error);
}

TEST_CASE("prediction refuses a model without support vectors") {
  TrainedModel empty;
  empty.params.gamma = 1.0;
  CHECK_THROWS_AS(predict(empty, Eigen::Vector3d{0.5, 0.0, 50.0}), std::invalid_argument);
}

TEST_CASE("training rejects degenerate inputs") {
  std::vector<SignatureRecord> one_class{{0.9, 1.0, 90.0, TraceLabel::covert},
                                         {0.8, 0.9, 85.0, TraceLabel::covert}};
  CHECK_THROWS_WITH_AS(train(one_class, KernelParams{}, 1), doctest::Contains("both classes"),
                       std::invalid_argument);

  std::vector<SignatureRecord> with_nan{{0.9, 1.0, 90.0, TraceLabel::covert},
                                        {std::nan(""), -1.0, 10.0, TraceLabel::overt}};
  CHECK_THROWS_AS(train(with_nan, KernelParams{}, 1), std::invalid_argument);

  KernelParams bad;
  bad.box_constraint = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("auto gamma is one over three times the scaled feature variance") {
  FeatureMatrix x(4, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  CHECK(auto_gamma(x) == doctest::Approx(1.0 / (3.0 * var)).epsilon(1e-12));
  CHECK_THROWS_AS(auto_gamma(FeatureMatrix::Ones(5, 3)), std::invalid_argument);
}
