#include <doctest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "trusterm/data.hpp"
#include "trusterm/fairness.hpp"
#include "trusterm/solver.hpp"

using namespace trusterm;

namespace {

Dataset two_group_dataset(std::uint64_t seed, Eigen::Index per_group, double noise_a,
                          double noise_b) {
  Rng rng(seed);
  const Eigen::Index m = 2 * per_group;
  Dataset d;
  d.X.resize(m, 1);
  d.y.resize(m);
  d.weights = Vector::Ones(m);
  d.s = Eigen::VectorXi(m);
  d.group_names = {"A", "B"};
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool in_b = i >= per_group;
    d.X(i, 0) = in_b ? 1.0 : 0.0;
    const double noise = (in_b ? noise_b : noise_a) * rng.normal();
    d.y[i] = (in_b ? -1.0 : 1.0) + noise;
    (*d.s)[i] = in_b ? 1 : 0;
  }
  return d;
}

}  // namespace

TEST_CASE("group_risk computes per-group weighted means and the largest gap") {
  // Group A losses {0, 2}, group B loss {4} under h = 0, squared loss.
  Dataset d;
  d.X = Matrix::Zero(3, 1);
  d.y.resize(3);
  d.y << 0.0, std::sqrt(2.0), 2.0;
  d.weights = Vector::Ones(3);
  d.s = Eigen::VectorXi(3);
  *d.s << 0, 0, 1;
  d.group_names = {"A", "B"};
  LinearHypothesis zero{Vector::Zero(1), 0.0};

  const FairnessReport report = group_risk(d, zero, LossKind::squared());
  REQUIRE(report.per_group_risk.size() == 2);
  CHECK(report.per_group_risk[0].second == doctest::Approx(1.0));
  CHECK(report.per_group_risk[1].second == doctest::Approx(4.0));
  CHECK(report.max_gap == doctest::Approx(3.0));
  CHECK_FALSE(report.weights_applied);

  // Equal losses across groups: zero gap.
  Dataset equal = d;
  equal.y << 1.0, 1.0, 1.0;
  CHECK(group_risk(equal, zero, LossKind::squared()).max_gap == doctest::Approx(0.0));

  Dataset no_sensitive = testutil::random_regression(5, 1, 0);
  CHECK_THROWS_AS(group_risk(no_sensitive, zero, LossKind::squared()), MissingSensitiveError);

  Dataset empty_group = d;
  empty_group.group_names = {"A", "B", "C"};
  CHECK_THROWS_AS(group_risk(empty_group, zero, LossKind::squared()), EmptyGroupError);
}

TEST_CASE("group_risk matches an independent per-group scan") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto d = testutil::random_regression(40, 2, seed + 10, 0.6);
    Rng rng(seed);
    d.s = Eigen::VectorXi(40);
    for (Eigen::Index i = 0; i < 40; ++i) (*d.s)[i] = static_cast<int>(rng.below(3));
    d.group_names = {"g0", "g1", "g2"};
    const auto h = testutil::random_hypothesis(2, seed + 20);
    const auto report = group_risk(d, h, LossKind::absolute());

    for (int g = 0; g < 3; ++g) {
      double num = 0.0;
      double den = 0.0;
      for (Eigen::Index i = 0; i < 40; ++i) {
        if ((*d.s)[i] != g) continue;
        num += eval_loss(LossKind::absolute(), d.y[i], predict(h, d.X.row(i).transpose()));
        den += 1.0;
      }
      CHECK(report.per_group_risk[static_cast<std::size_t>(g)].second ==
            doctest::Approx(num / den).epsilon(1e-12));
    }
  }
}

TEST_CASE("sample_weights equalizes per-group totals") {
  Dataset d;
  d.X = Matrix::Zero(4, 1);
  d.y = Vector::Zero(4);
  d.weights = Vector::Ones(4);
  d.s = Eigen::VectorXi(4);
  *d.s << 0, 0, 0, 1;
  d.group_names = {"A", "B"};

  const Vector w = sample_weights(d);
  CHECK(w[0] == doctest::Approx(2.0 / 3.0));
  CHECK(w[3] == doctest::Approx(2.0));
  CHECK(w.sum() == doctest::Approx(4.0).epsilon(1e-12));
  // Per-group totals both m/G = 2.
  CHECK(w.head(3).sum() == doctest::Approx(2.0).epsilon(1e-12));

  // Balanced groups get unit weights.
  Dataset balanced = d;
  *balanced.s << 0, 0, 1, 1;
  const Vector wb = sample_weights(balanced);
  CHECK((wb.array() == 1.0).all());
}

TEST_CASE("reweighting leaves the zero-hypothesis risk alone for matched label stats") {
  // Groups of different sizes but identical empirical label distributions:
  // the inverse-frequency weights change proportions, not the mean loss.
  Dataset d;
  d.X = Matrix::Zero(9, 1);
  d.y.resize(9);
  d.y << 0.5, 1.5, 2.5, 0.5, 1.5, 2.5, 0.5, 1.5, 2.5;
  d.weights = Vector::Ones(9);
  d.s = Eigen::VectorXi(9);
  *d.s << 0, 0, 0, 1, 1, 1, 1, 1, 1;  // A holds one copy, B holds two
  d.group_names = {"A", "B"};

  LinearHypothesis zero{Vector::Zero(1), 0.0};
  const double before = empirical_risk(d, zero, LossKind::squared());
  Dataset reweighted = d;
  reweighted.weights = sample_weights(d);
  const double after = empirical_risk(reweighted, zero, LossKind::squared());
  CHECK(after == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("fairness_penalty is the squared gap sum with a checkable gradient") {
  Dataset d;
  d.X = Matrix::Zero(3, 1);
  d.y.resize(3);
  d.y << 0.0, std::sqrt(2.0), 2.0;
  d.weights = Vector::Ones(3);
  d.s = Eigen::VectorXi(3);
  *d.s << 0, 0, 1;
  d.group_names = {"A", "B"};
  LinearHypothesis zero{Vector::Zero(1), 0.0};
  CHECK(fairness_penalty(d, zero, LossKind::squared()) == doctest::Approx(9.0));

  Dataset equal = d;
  equal.y << 1.0, 1.0, 1.0;
  CHECK(fairness_penalty(equal, zero, LossKind::squared()) == doctest::Approx(0.0));

  // Central-difference gradient check on random smooth instances.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rd = testutil::random_regression(25, 2, seed + 30, 0.5);
    Rng rng(seed);
    rd.s = Eigen::VectorXi(25);
    for (Eigen::Index i = 0; i < 25; ++i) (*rd.s)[i] = static_cast<int>(rng.below(2));
    rd.group_names = {"A", "B"};
    auto h = testutil::random_hypothesis(2, seed + 40);

    const PenaltyGradient g = fairness_penalty_with_gradient(rd, h, LossKind::squared());
    CHECK(g.value == doctest::Approx(fairness_penalty(rd, h, LossKind::squared())));
    const double step = 1e-6;
    for (Eigen::Index j = 0; j < 2; ++j) {
      auto hp = h;
      auto hm = h;
      hp.w[j] += step;
      hm.w[j] -= step;
      const double fd = (fairness_penalty(rd, hp, LossKind::squared()) -
                         fairness_penalty(rd, hm, LossKind::squared())) /
                        (2.0 * step);
      if (std::fabs(fd) > 1e-8)
        CHECK(g.grad_w[j] == doctest::Approx(fd).epsilon(1e-4));
    }
    auto hbp = h;
    auto hbm = h;
    hbp.b += step;
    hbm.b -= step;
    const double fdb = (fairness_penalty(rd, hbp, LossKind::squared()) -
                        fairness_penalty(rd, hbm, LossKind::squared())) /
                       (2.0 * step);
    if (std::fabs(fdb) > 1e-8) CHECK(g.grad_b == doctest::Approx(fdb).epsilon(1e-4));
  }
}

TEST_CASE("penalty vanishes exactly when the gap does") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto d = testutil::random_regression(30, 2, seed + 60, 0.4);
    Rng rng(seed);
    d.s = Eigen::VectorXi(30);
    for (Eigen::Index i = 0; i < 30; ++i) (*d.s)[i] = static_cast<int>(rng.below(2));
    d.group_names = {"A", "B"};
    const auto h = testutil::random_hypothesis(2, seed + 70);
    const double penalty = fairness_penalty(d, h, LossKind::squared());
    const double gap = group_risk(d, h, LossKind::squared()).max_gap;
    CHECK(penalty == doctest::Approx(gap * gap).epsilon(1e-12));
    CHECK((penalty <= 1e-12) == (gap <= 1e-6));
  }
}

TEST_CASE("raising the fairness coefficient shrinks the group gap") {
  const Dataset d = two_group_dataset(5, 30, 0.05, 1.0);
  auto config_for = [](double lambda) {
    SolverConfig cfg;
    cfg.max_iter = 30000;
    cfg.step_scale = 0.05 / (1.0 + lambda);  // steeper penalty, gentler step
    cfg.tol = 1e-13;
    return cfg;
  };

  double previous_gap = std::numeric_limits<double>::infinity();
  double gap0 = 0.0;
  double gap10 = 0.0;
  for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
    Regularizer reg;
    if (lambda > 0.0) reg.fairness_gap(lambda);
    const FitResult fit = erm_fit(d, LossKind::squared(), reg, config_for(lambda));
    const double gap = group_risk(d, fit.hypothesis, LossKind::squared()).max_gap;
    CHECK(gap <= previous_gap + 1e-9);
    previous_gap = gap;
    if (lambda == 0.0) gap0 = gap;
    if (lambda == 10.0) gap10 = gap;
  }
  // The unpenalized gap is large by construction; the strongest penalty
  // should have visibly closed it.
  CHECK(gap10 < 0.5 * gap0);
}

TEST_CASE("training on counterfactually flipped data ignores the flipped column") {
  Rng rng(8);
  const Eigen::Index m = 40;
  Dataset d;
  d.X.resize(m, 2);
  d.y.resize(m);
  d.weights = Vector::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d.X(i, 0) = rng.uniform01() < 0.5 ? 0.0 : 1.0;  // "sensitive" feature
    d.X(i, 1) = rng.normal();
    d.y[i] = 1.5 * d.X(i, 1) + 0.3 + 0.05 * rng.normal() + 0.8 * d.X(i, 0);
  }
  const Dataset flipped = counterfactual_flip(d, 0);
  SolverConfig cfg;
  cfg.max_iter = 30000;
  cfg.step_scale = 0.2;
  cfg.tol = 1e-14;
  const FitResult fit = erm_fit(flipped, LossKind::squared(), Regularizer{}, cfg);
  CHECK(std::fabs(fit.hypothesis.w[0]) <= 1e-3);
  CHECK(fit.hypothesis.w[1] == doctest::Approx(1.5).epsilon(0.05));
}

TEST_CASE("individual fairness audit flags near pairs with differing outputs") {
  // Two points identical except the masked sensitive column; h is that
  // column's indicator.
  Dataset d;
  d.X.resize(2, 2);
  d.X << 0.0, 1.0, 1.0, 1.0;
  d.y.resize(2);
  d.y << 0.0, 0.0;
  d.weights = Vector::Ones(2);
  LinearHypothesis indicator{(Vector(2) << 1.0, 0.0).finished(), 0.0};

  const auto report = individual_fairness_audit(indicator, d, {0}, 0.5, 0.5);
  REQUIRE(report.individual_violations.size() == 1);
  CHECK(report.individual_violations[0].distance == doctest::Approx(0.0));
  CHECK(report.individual_violations[0].output_gap == doctest::Approx(1.0));

  // A hypothesis that ignores the masked feature raises nothing.
  LinearHypothesis constant{Vector::Zero(2), 0.0};
  CHECK(individual_fairness_audit(constant, d, {0}, 0.5, 0.5).individual_violations.empty());

  CHECK_THROWS_AS(individual_fairness_audit(indicator, d, {0, 1}, 0.5, 0.5),
                  DegenerateMetricError);
  CHECK_THROWS_AS(individual_fairness_audit(indicator, d, {0}, 0.0, 0.5), RangeError);
}

TEST_CASE("audit violation count matches an exhaustive pair scan") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto d = testutil::random_regression(25, 3, seed + 80, 0.5);
    const auto h = testutil::random_hypothesis(3, seed + 90);
    const double tau_d = 1.5;
    const double tau_out = 0.8;
    const auto report = individual_fairness_audit(h, d, {2}, tau_d, tau_out);

    long expected = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      for (Eigen::Index j = i + 1; j < d.size(); ++j) {
        const double dx0 = d.X(i, 0) - d.X(j, 0);
        const double dx1 = d.X(i, 1) - d.X(j, 1);
        const double dist = std::sqrt(dx0 * dx0 + dx1 * dx1);
        const double gap = std::fabs(predict(h, d.X.row(i).transpose()) -
                                     predict(h, d.X.row(j).transpose()));
        if (dist <= tau_d && gap > tau_out) ++expected;
      }
    }
    CHECK(static_cast<long>(report.individual_violations.size()) == expected);
  }
}

TEST_CASE("proxy leakage probe warns when features encode the sensitive group") {
  Rng rng(14);
  const Eigen::Index m = 60;
  Dataset d;
  d.X.resize(m, 2);
  d.y.resize(m);
  d.weights = Vector::Ones(m);
  d.s = Eigen::VectorXi(m);
  d.group_names = {"A", "B"};
  for (Eigen::Index i = 0; i < m; ++i) {
    const int group = rng.uniform01() < 0.5 ? 0 : 1;
    (*d.s)[i] = group;
    d.X(i, 0) = group == 1 ? 2.0 + 0.1 * rng.normal() : -2.0 + 0.1 * rng.normal();
    d.X(i, 1) = rng.normal();
    d.y[i] = rng.normal();
  }
  LinearHypothesis h{Vector::Zero(2), 0.0};
  const auto leaky = individual_fairness_audit(h, d, {}, 0.1, 10.0);
  CHECK(leaky.proxy_accuracy > 0.75);
  CHECK(leaky.proxy_leakage_warning);

  // Independent group assignment: the probe cannot beat chance by much.
  Dataset opaque = d;
  for (Eigen::Index i = 0; i < m; ++i) {
    opaque.X(i, 0) = rng.normal();
    (*opaque.s)[i] = rng.uniform01() < 0.5 ? 0 : 1;
  }
  const auto silent = individual_fairness_audit(h, opaque, {}, 0.1, 10.0);
  CHECK(silent.proxy_accuracy < 0.75);
  CHECK_FALSE(silent.proxy_leakage_warning);
}
