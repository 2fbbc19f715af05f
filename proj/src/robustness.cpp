#include "trusterm/robustness.hpp"

#include <cmath>
#include <limits>

namespace trusterm {

double dual_norm(const PerPointBall& ball, const Vector& w) {
  return ball.norm == BallNorm::LInf ? w.lpNorm<1>() : w.norm();
}

double robust_pointwise_loss(const LossKind& kind, const PerPointBall& ball,
                             const LinearHypothesis& h, const Vector& x, double y) {
  if (ball.epsilon < 0.0) throw ConfigError("ball radius must be nonnegative");
  if (x.size() != h.w.size()) throw DimensionError("robust loss: dimension mismatch");
  const double shift = ball.epsilon * dual_norm(ball, h.w);
  const double yhat = h.w.dot(x) + h.b;
  switch (kind.tag) {
    case LossTag::Squared:
    case LossTag::Absolute:
    case LossTag::Huber: {
      // Even, nondecreasing in |residual|: worst case pushes the residual
      // magnitude up by the full margin shift.
      const double r = std::fabs(y - yhat) + shift;
      return eval_loss(kind, r, 0.0);
    }
    case LossTag::Logistic: {
      const double margin = y * yhat - shift;
      // log(1 + exp(-margin)) in stable form, reusing the loss on labels.
      return eval_loss(kind, 1.0, margin);
    }
    case LossTag::ZeroOne:
      throw UnsupportedLossError("use robust_zero_one for the zero-one loss");
  }
  throw UnsupportedLossError("unknown loss");
}

double adversarial_objective_bruteforce(const Dataset& d, const LinearHypothesis& h,
                                        double eta) {
  if (eta < 0.0) throw ConfigError("eta must be nonnegative");
  const Eigen::Index m = d.size();
  const Eigen::Index dim = d.dim();
  if (h.w.size() != dim) throw DimensionError("oracle: dimension mismatch");
  if (m * dim > 12)
    throw OracleSizeError("extreme-point enumeration limited to m*d <= 12");

  Vector residuals(m);
  for (Eigen::Index i = 0; i < m; ++i)
    residuals[i] = d.y[i] - (h.w.dot(d.X.row(i).transpose()) + h.b);

  if (eta == 0.0) return residuals.lpNorm<1>();

  // Each column perturbation u^(j) ranges over the 2m vertices +-eta e_i of
  // its l1 ball; enumerate the joint vertex set.
  const long choices = 2 * static_cast<long>(m);
  long combos = 1;
  for (Eigen::Index j = 0; j < dim; ++j) combos *= choices;

  double best = -std::numeric_limits<double>::infinity();
  std::vector<long> pick(static_cast<std::size_t>(dim));
  for (long c = 0; c < combos; ++c) {
    long rem = c;
    for (Eigen::Index j = 0; j < dim; ++j) {
      pick[static_cast<std::size_t>(j)] = rem % choices;
      rem /= choices;
    }
    Vector shifted = residuals;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const long p = pick[static_cast<std::size_t>(j)];
      const Eigen::Index row = static_cast<Eigen::Index>(p / 2);
      const double sign = (p % 2 == 0) ? 1.0 : -1.0;
      // x_row gains sign*eta in coordinate j, so its residual loses
      // w_j * sign * eta.
      shifted[row] -= h.w[j] * sign * eta;
    }
    best = std::max(best, shifted.lpNorm<1>());
  }
  return best;
}

double robust_lad_objective(const Dataset& d, const LinearHypothesis& h, double eta) {
  if (eta < 0.0) throw ConfigError("eta must be nonnegative");
  if (h.w.size() != d.dim()) throw DimensionError("robust objective: dimension mismatch");
  KahanSum sum;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    sum.add(std::fabs(d.y[i] - (h.w.dot(d.X.row(i).transpose()) + h.b)));
  return sum.value() + eta * h.w.lpNorm<1>();
}

double robust_zero_one(const LinearHypothesis& h, const Vector& x, double y,
                       const PerPointBall& ball) {
  if (y != 1.0 && y != -1.0) throw TaskMismatchError("robust_zero_one needs labels in {-1,+1}");
  const double margin = y * (h.w.dot(x) + h.b) - ball.epsilon * dual_norm(ball, h.w);
  return margin <= 0.0 ? 1.0 : 0.0;
}

namespace {

// Unit-dual-norm direction maximizing delta' w.
Vector steepest_direction(const PerPointBall& ball, const Vector& w) {
  if (ball.norm == BallNorm::LInf) {
    Vector s(w.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) s[j] = w[j] > 0.0 ? 1.0 : (w[j] < 0.0 ? -1.0 : 0.0);
    return s;
  }
  const double n = w.norm();
  if (n == 0.0) return Vector::Zero(w.size());
  return w / n;
}

}  // namespace

Dataset adversarial_training_set(const Dataset& d, const LinearHypothesis& h,
                                 const LossKind& kind, const PerPointBall& ball) {
  if (h.w.size() != d.dim()) throw DimensionError("adversarial set: dimension mismatch");
  const Eigen::Index m = d.size();
  Dataset out;
  out.X.resize(2 * m, d.dim());
  out.y.resize(2 * m);
  out.weights.resize(2 * m);
  if (d.s) out.s = Eigen::VectorXi(2 * m);
  out.X.topRows(m) = d.X;
  out.y.head(m) = d.y;
  out.weights.head(m) = d.weights;
  if (d.s) out.s->head(m) = *d.s;

  const Vector direction = steepest_direction(ball, h.w);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector x = d.X.row(i).transpose();
    Vector x_adv = x;
    if (kind.tag == LossTag::Logistic || kind.tag == LossTag::ZeroOne) {
      x_adv -= ball.epsilon * d.y[i] * direction;
    } else {
      const double r = d.y[i] - (h.w.dot(x) + h.b);
      const double sign = r >= 0.0 ? 1.0 : -1.0;
      x_adv -= ball.epsilon * sign * direction;
    }
    out.X.row(m + i) = x_adv.transpose();
    out.y[m + i] = d.y[i];
    out.weights[m + i] = d.weights[i];
    if (d.s) (*out.s)[m + i] = (*d.s)[i];
  }
  out.feature_names = d.feature_names;
  out.group_names = d.group_names;
  out.task = d.task;
  out.provenance = d.provenance;
  return out;
}

namespace {

template <typename Hypothesis>
double lipschitz_impl(const Hypothesis& h, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("probe matrices must have matching shapes");
  if (a.rows() < 1) throw DegenerateProbesError("no probe pairs given");
  double best = -1.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vector xa = a.row(i).transpose();
    const Vector xb = b.row(i).transpose();
    const double dist = (xa - xb).norm();
    if (dist == 0.0) continue;
    best = std::max(best, std::fabs(predict(h, xa) - predict(h, xb)) / dist);
  }
  if (best < 0.0) throw DegenerateProbesError("every probe pair is degenerate");
  return best;
}

}  // namespace

double empirical_lipschitz(const LinearHypothesis& h, const Matrix& probes_a,
                           const Matrix& probes_b) {
  return lipschitz_impl(h, probes_a, probes_b);
}

double empirical_lipschitz(const TreeHypothesis& h, const Matrix& probes_a,
                           const Matrix& probes_b) {
  return lipschitz_impl(h, probes_a, probes_b);
}

double local_robustness_radius(const LinearHypothesis& h, const Vector& x) {
  if (x.size() != h.w.size()) throw DimensionError("radius: dimension mismatch");
  const double n = h.w.norm();
  if (n == 0.0)
    throw UndefinedRadiusError("w = 0 classifies every point identically; radius undefined");
  return std::fabs(h.w.dot(x) + h.b) / n;
}

RobustnessReport robustness_report(const Dataset& d, const LinearHypothesis& h,
                                   const LossKind& kind, const PerPointBall& ball) {
  RobustnessReport report;
  report.budget = ball;
  report.clean_risk = empirical_risk(d, h, kind);
  KahanSum num;
  KahanSum den;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const Vector x = d.X.row(i).transpose();
    const double loss = kind.tag == LossTag::ZeroOne
                            ? robust_zero_one(h, x, d.y[i], ball)
                            : robust_pointwise_loss(kind, ball, h, x, d.y[i]);
    num.add(d.weights[i] * loss);
    den.add(d.weights[i]);
  }
  report.robust_risk = num.value() / den.value();

  // Consecutive dataset rows double as Lipschitz probes.
  if (d.size() >= 2) {
    Matrix a = d.X.topRows(d.size() - 1);
    Matrix b = d.X.bottomRows(d.size() - 1);
    try {
      report.empirical_lipschitz = empirical_lipschitz(h, a, b);
    } catch (const DegenerateProbesError&) {
      report.empirical_lipschitz = 0.0;
    }
  } else {
    report.empirical_lipschitz = h.w.norm();
  }

  if (d.task == TaskKind::BinaryClassification && h.w.norm() > 0.0) {
    double radius = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < d.size(); ++i)
      radius = std::min(radius, local_robustness_radius(h, d.X.row(i).transpose()));
    report.min_local_radius = radius;
  }
  return report;
}

}  // namespace trusterm
