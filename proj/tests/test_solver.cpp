#include <doctest.h>

#include <limits>

#include "oracles.hpp"
#include "test_util.hpp"
#include "trusterm/data.hpp"
#include "trusterm/solver.hpp"

using namespace trusterm;

namespace {

SolverConfig tight_config(long iters = 20000, double step = 0.2) {
  SolverConfig cfg;
  cfg.max_iter = iters;
  cfg.step_scale = step;
  cfg.tol = 1e-14;
  return cfg;
}

}  // namespace

TEST_CASE("erm_fit recovers an exactly linear relation") {
  Matrix x(6, 1);
  x << -2.0, -1.0, 0.0, 1.0, 2.0, 3.0;
  Vector y = 2.0 * x.col(0);
  y.array() += 1.0;
  const auto d = testutil::make_dataset(x, y);

  const FitResult fit = erm_fit(d, LossKind::squared(), Regularizer{}, tight_config());
  CHECK(fit.hypothesis.w[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(fit.hypothesis.b == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(fit.train_risk < 1e-8);
}

TEST_CASE("erm_fit reaches the normal-equations optimum") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto d = testutil::random_regression(25, 3, seed, 0.3);
    const auto sol = oracles::normal_equations(d.X, d.y, d.weights);
    const FitResult fit = erm_fit(d, LossKind::squared(), Regularizer{}, tight_config());
    CHECK(fit.best_objective == doctest::Approx(sol.objective).epsilon(1e-8));
    CHECK(fit.best_objective >= sol.objective - 1e-9);
  }
}

TEST_CASE("erm_fit honors per-point weights") {
  auto d = testutil::random_regression(20, 2, 77, 0.5);
  Rng rng(5);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.weights[i] = rng.uniform(0.2, 4.0);
  const auto sol = oracles::normal_equations(d.X, d.y, d.weights);
  const FitResult fit = erm_fit(d, LossKind::squared(), Regularizer{}, tight_config());
  CHECK(fit.best_objective == doctest::Approx(sol.objective).epsilon(1e-7));
}

TEST_CASE("large L1 coefficients zero the weights on centered data") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto d = testutil::random_regression(30, 3, seed + 50, 0.4);
    d.X.rowwise() -= d.X.colwise().mean();
    const double y_mean = d.y.mean();
    // Zero is optimal iff alpha >= max_j |(2/m) sum x_ij (y_i - ybar)|
    // (gradient of the squared loss at w = 0, b = ybar).
    const Vector grad0 =
        2.0 * d.X.transpose() * (d.y.array() - y_mean).matrix() / static_cast<double>(d.size());
    const double needed = grad0.cwiseAbs().maxCoeff();

    Regularizer strong;
    strong.l1(1.05 * needed);
    const FitResult zero = erm_fit(d, LossKind::squared(), strong, tight_config());
    CHECK(zero.hypothesis.w.cwiseAbs().maxCoeff() <= 1e-6);

    Regularizer weak;
    weak.l1(0.25 * needed);
    const FitResult nonzero = erm_fit(d, LossKind::squared(), weak, tight_config());
    CHECK(nonzero.hypothesis.w.cwiseAbs().maxCoeff() > 1e-4);
  }
}

TEST_CASE("objective_value composes risk, penalties, and indicators") {
  const auto d = testutil::random_regression(10, 2, 9);
  LinearHypothesis h{(Vector(2) << 2.0, 0.0).finished(), 0.5};

  CHECK(objective_value(d, h, LossKind::squared(), Regularizer{}) ==
        doctest::Approx(empirical_risk(d, h, LossKind::squared())));

  Regularizer l2;
  l2.l2(0.3);
  CHECK(objective_value(d, h, LossKind::squared(), l2) ==
        doctest::Approx(empirical_risk(d, h, LossKind::squared()) + 0.3 * 4.0));

  Regularizer ball;
  ball.norm_ball(1.0, 2);
  CHECK(objective_value(d, h, LossKind::squared(), ball) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("diagnose applies the fixed thresholds") {
  CHECK(diagnose(0.30, 0.31, 0.20).verdict == Verdict::Underfitting);
  CHECK(diagnose(0.10, 0.50, 0.20).verdict == Verdict::Overfitting);
  CHECK(diagnose(0.19, 0.21, 0.20).verdict == Verdict::Ok);
  CHECK_THROWS_AS(diagnose(0.1, 0.1, 0.0), InvalidBaselineError);
  CHECK_THROWS_AS(diagnose(0.1, 0.1, -1.0), InvalidBaselineError);
}

TEST_CASE("proximal operators behave as fixed points and projections") {
  Vector w(3);
  w << 0.05, -0.02, 0.0;
  CHECK(soft_threshold(w, 0.1).cwiseAbs().maxCoeff() == 0.0);

  Vector big(3);
  big << 3.0, -4.0, 0.0;
  const NormBallConstraint ball{1.0, 2};
  const Vector once = project_onto_ball(big, ball);
  const Vector twice = project_onto_ball(once, ball);
  CHECK(once.norm() == doctest::Approx(1.0));
  CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-12);

  const NormBallConstraint l1ball{1.0, 1};
  const Vector p1 = project_onto_ball(big, l1ball);
  CHECK(p1.lpNorm<1>() == doctest::Approx(1.0));
  const Vector p2 = project_onto_ball(p1, l1ball);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() <= 1e-12);

  Vector inside(2);
  inside << 0.2, 0.1;
  CHECK(project_onto_ball(inside, l1ball) == inside);
}

TEST_CASE("fits under a norm-ball constraint stay feasible") {
  const auto d = testutil::random_regression(40, 3, 15, 0.1);
  Regularizer reg;
  reg.norm_ball(0.5, 2);
  const FitResult fit = erm_fit(d, LossKind::squared(), reg, tight_config());
  CHECK(fit.hypothesis.w.norm() <= 0.5 + 1e-9);

  Regularizer reg1;
  reg1.norm_ball(0.5, 1);
  const FitResult fit1 = erm_fit(d, LossKind::squared(), reg1, tight_config());
  CHECK(fit1.hypothesis.w.lpNorm<1>() <= 0.5 + 1e-9);
}

TEST_CASE("best-so-far objective is nonincreasing") {
  const auto d = testutil::random_regression(15, 2, 31, 0.2);
  const FitResult fit = erm_fit(d, LossKind::absolute(), Regularizer{}, tight_config(3000));
  double best = std::numeric_limits<double>::infinity();
  for (double v : fit.objective_trace) {
    best = std::min(best, v);
    CHECK(best <= v);
  }
  CHECK(fit.best_objective == best);
}

TEST_CASE("erm_fit is bitwise deterministic") {
  const auto d = testutil::random_regression(12, 2, 8, 0.3);
  Regularizer reg;
  reg.l1(0.05).l2(0.1);
  const FitResult a = erm_fit(d, LossKind::huber(0.8), reg, tight_config(2000));
  const FitResult b = erm_fit(d, LossKind::huber(0.8), reg, tight_config(2000));
  REQUIRE(a.objective_trace.size() == b.objective_trace.size());
  for (std::size_t i = 0; i < a.objective_trace.size(); ++i)
    CHECK(a.objective_trace[i] == b.objective_trace[i]);
  CHECK(a.hypothesis.w == b.hypothesis.w);
  CHECK(a.hypothesis.b == b.hypothesis.b);
}

TEST_CASE("augmented fits match L2-penalized fits on the shared objective") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto d = testutil::random_regression(12, 2, seed + 300, 0.3);
    const double alpha = 0.4;
    const Dataset augmented = augment_noise(d, alpha);

    const FitResult on_augmented =
        erm_fit(augmented, LossKind::squared(), Regularizer{}, tight_config(30000));
    Regularizer l2;
    l2.l2(alpha / static_cast<double>(d.dim()));
    const FitResult penalized = erm_fit(d, LossKind::squared(), l2, tight_config(30000));

    CHECK(on_augmented.best_objective ==
          doctest::Approx(penalized.best_objective).epsilon(1e-5));
  }
}

TEST_CASE("solver error paths") {
  const auto d = testutil::random_regression(10, 2, 1);
  CHECK_THROWS_AS(erm_fit(d, LossKind::zero_one(), Regularizer{}, tight_config()),
                  UnsupportedTrainingLossError);

  SolverConfig wild;
  wild.max_iter = 2000;
  wild.step_scale = 1e40;
  CHECK_THROWS_AS(erm_fit(d, LossKind::squared(), Regularizer{}, wild), NumericalError);

  SolverConfig bad;
  bad.max_iter = 0;
  CHECK_THROWS_AS(erm_fit(d, LossKind::squared(), Regularizer{}, bad), ConfigError);
}

TEST_CASE("a given init at the optimum is kept as the best iterate") {
  const auto d = testutil::random_regression(20, 2, 19, 0.2);
  const auto sol = oracles::normal_equations(d.X, d.y, d.weights);

  SolverConfig warm;
  warm.max_iter = 50;
  warm.step_scale = 0.1;
  warm.tol = 1e-14;
  warm.init = LinearHypothesis{sol.w, sol.b};
  const FitResult fit = erm_fit(d, LossKind::squared(), Regularizer{}, warm);
  CHECK(fit.best_objective == doctest::Approx(sol.objective).epsilon(1e-12));
  CHECK((fit.hypothesis.w - sol.w).cwiseAbs().maxCoeff() <= 1e-12);

  // An infeasible init is projected onto the constraint ball first.
  SolverConfig constrained = warm;
  constrained.init = LinearHypothesis{10.0 * Vector::Ones(2), 0.0};
  Regularizer reg;
  reg.norm_ball(1.0, 2);
  const FitResult projected = erm_fit(d, LossKind::squared(), reg, constrained);
  CHECK(projected.hypothesis.w.norm() <= 1.0 + 1e-9);

  SolverConfig wrong_dim = warm;
  wrong_dim.init = LinearHypothesis{Vector::Zero(5), 0.0};
  CHECK_THROWS_AS(erm_fit(d, LossKind::squared(), Regularizer{}, wrong_dim), DimensionError);
}

TEST_CASE("huber fit tracks the clean trend against an outlier") {
  Matrix x(6, 1);
  x << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Vector y(6);
  y << 1.5, 2.5, 3.5, 4.5, 5.5, 10.0;
  const auto d = testutil::make_dataset(x, y);

  SolverConfig cfg;
  cfg.max_iter = 60000;
  cfg.step_scale = 0.2;
  cfg.tol = 1e-14;

  const FitResult huber = erm_fit(d, LossKind::huber(1.0), Regularizer{}, cfg);
  SolverConfig cfg_sq = cfg;
  cfg_sq.step_scale = 0.05;  // squared loss on x up to 6 needs a gentler step
  const FitResult squared = erm_fit(d, LossKind::squared(), Regularizer{}, cfg_sq);

  // Convex-solver reference for the fixed-delta Huber minimizer: (1.3, -0.2),
  // objective 0.408333...; least squares lands at (1.5, -2/3).
  CHECK(huber.hypothesis.w[0] == doctest::Approx(1.3).epsilon(0.02));
  CHECK(huber.hypothesis.b == doctest::Approx(-0.2).epsilon(0.25));
  CHECK(huber.best_objective == doctest::Approx(0.40833333333333333).epsilon(1e-6));
  CHECK(squared.hypothesis.w[0] == doctest::Approx(1.5).epsilon(1e-3));
  CHECK(squared.hypothesis.b == doctest::Approx(-2.0 / 3.0).epsilon(1e-2));
  // The Huber line sits closer to the clean trend; least squares is pulled
  // at least 0.15 further toward the outlier.
  CHECK(squared.hypothesis.w[0] - huber.hypothesis.w[0] >= 0.15);
}
