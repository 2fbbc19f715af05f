#include "trusterm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trusterm/fairness.hpp"

namespace trusterm {

namespace {

constexpr double kBallFeasibilitySlack = 1e-9;

// One block of weighted points entering the objective. The training set is
// one segment; a simulatability penalty adds a second segment of
// pseudo-labeled points with constant weight lambda, so that the penalized
// objective performs the exact same arithmetic as a fit on the merged
// dataset.
struct Segment {
  const Matrix* X;
  const Vector* y;
  const Vector* weights;  // nullptr => const_weight applies to every row
  double const_weight;
};

double dot_row(const Matrix& X, Eigen::Index i, const Vector& w) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) acc += w[j] * X(i, j);
  return acc;
}

std::vector<Segment> build_segments(const Dataset& d, const Regularizer& reg) {
  std::vector<Segment> segs;
  segs.push_back(Segment{&d.X, &d.y, &d.weights, 1.0});
  for (const auto& term : reg.terms) {
    if (const auto* sp = std::get_if<SimulatabilityPenaltyTerm>(&term)) {
      if (sp->pseudo_X.rows() == 0) continue;
      if (sp->pseudo_X.cols() != d.X.cols())
        throw DimensionError("pseudo set dimension does not match dataset");
      segs.push_back(Segment{&sp->pseudo_X, &sp->pseudo_labels, nullptr, sp->lambda});
    }
  }
  return segs;
}

double total_segment_weight(const std::vector<Segment>& segs) {
  KahanSum den;
  for (const auto& seg : segs) {
    for (Eigen::Index i = 0; i < seg.X->rows(); ++i)
      den.add(seg.weights ? (*seg.weights)[i] : seg.const_weight);
  }
  return den.value();
}

// Weighted mean loss over all segments (numerator and denominator both run
// segment by segment, row by row).
double segment_risk(const std::vector<Segment>& segs, double total_weight,
                    const LinearHypothesis& h, const LossKind& kind) {
  KahanSum num;
  for (const auto& seg : segs) {
    for (Eigen::Index i = 0; i < seg.X->rows(); ++i) {
      const double wt = seg.weights ? (*seg.weights)[i] : seg.const_weight;
      const double yhat = dot_row(*seg.X, i, h.w) + h.b;
      num.add(wt * eval_loss(kind, (*seg.y)[i], yhat));
    }
  }
  return num.value() / total_weight;
}

void segment_risk_gradient(const std::vector<Segment>& segs, double total_weight,
                           const LinearHypothesis& h, const LossKind& kind, Vector& grad_w,
                           double& grad_b) {
  grad_w.setZero(h.w.size());
  grad_b = 0.0;
  for (const auto& seg : segs) {
    for (Eigen::Index i = 0; i < seg.X->rows(); ++i) {
      const double wt = seg.weights ? (*seg.weights)[i] : seg.const_weight;
      const double yhat = dot_row(*seg.X, i, h.w) + h.b;
      const double coef = wt * loss_derivative(kind, (*seg.y)[i], yhat);
      for (Eigen::Index j = 0; j < grad_w.size(); ++j) grad_w[j] += coef * seg.X->coeff(i, j);
      grad_b += coef;
    }
  }
  grad_w /= total_weight;
  grad_b /= total_weight;
}

double penalty_terms_value(const Dataset& d, const LinearHypothesis& h, const LossKind& kind,
                           const Regularizer& reg) {
  double value = 0.0;
  for (const auto& term : reg.terms) {
    if (const auto* l1 = std::get_if<L1Term>(&term)) {
      double n1 = 0.0;
      for (Eigen::Index j = 0; j < h.w.size(); ++j) n1 += std::fabs(h.w[j]);
      value += l1->alpha * n1;
    } else if (const auto* l2 = std::get_if<L2Term>(&term)) {
      double n2 = 0.0;
      for (Eigen::Index j = 0; j < h.w.size(); ++j) n2 += h.w[j] * h.w[j];
      value += l2->alpha * n2;
    } else if (const auto* ball = std::get_if<NormBallConstraint>(&term)) {
      const double n = ball->norm == 1 ? h.w.lpNorm<1>() : h.w.norm();
      if (n > ball->radius + kBallFeasibilitySlack)
        return std::numeric_limits<double>::infinity();
    } else if (const auto* fg = std::get_if<FairnessGapTerm>(&term)) {
      if (fg->lambda > 0.0) value += fg->lambda * fairness_penalty(d, h, kind);
    }
    // SimulatabilityPenaltyTerm is folded into the weighted risk.
  }
  return value;
}

}  // namespace

Vector soft_threshold(const Vector& w, double t) {
  Vector out(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > t) {
      out[j] = w[j] - t;
    } else if (w[j] < -t) {
      out[j] = w[j] + t;
    } else {
      out[j] = 0.0;
    }
  }
  return out;
}

Vector project_onto_ball(const Vector& w, const NormBallConstraint& ball) {
  if (ball.norm == 2) {
    const double n = w.norm();
    if (n <= ball.radius) return w;
    return w * (ball.radius / n);
  }
  // l1 ball: sort-based projection (Duchi et al. style).
  const double n1 = w.lpNorm<1>();
  if (n1 <= ball.radius) return w;
  std::vector<double> mags(static_cast<std::size_t>(w.size()));
  for (Eigen::Index j = 0; j < w.size(); ++j) mags[static_cast<std::size_t>(j)] = std::fabs(w[j]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cumsum += mags[k];
    const double candidate = (cumsum - ball.radius) / static_cast<double>(k + 1);
    if (candidate < mags[k]) {
      theta = candidate;
    } else {
      break;
    }
  }
  return soft_threshold(w, theta);
}

double objective_value(const Dataset& d, const LinearHypothesis& h, const LossKind& kind,
                       const Regularizer& reg, const std::optional<ObjectiveTilt>& tilt) {
  if (d.size() < 1) throw EmptyDatasetError("objective_value: empty dataset");
  if (d.dim() != h.w.size()) throw DimensionError("objective_value: dimension mismatch");
  reg.validate();
  const auto segs = build_segments(d, reg);
  const double total = total_segment_weight(segs);
  double obj = segment_risk(segs, total, h, kind);
  obj += penalty_terms_value(d, h, kind, reg);
  if (tilt) obj += tilt->coeff_w.dot(h.w);
  return obj;
}

FitResult erm_fit(const Dataset& d, const LossKind& kind, const Regularizer& reg,
                  const SolverConfig& cfg, const std::optional<ObjectiveTilt>& tilt) {
  if (kind.tag == LossTag::ZeroOne)
    throw UnsupportedTrainingLossError("zero-one loss cannot be trained directly");
  if (d.size() < 1) throw EmptyDatasetError("erm_fit: empty dataset");
  if (cfg.max_iter < 1 || cfg.step_scale <= 0.0 || cfg.tol <= 0.0)
    throw ConfigError("solver config entries must be positive");
  reg.validate();
  if (tilt && tilt->coeff_w.size() != d.dim())
    throw DimensionError("tilt dimension does not match dataset");

  const auto segs = build_segments(d, reg);
  const double total = total_segment_weight(segs);

  double l1_alpha = 0.0;
  double l2_alpha = 0.0;
  double fairness_lambda = 0.0;
  const NormBallConstraint* ball = nullptr;
  for (const auto& term : reg.terms) {
    if (const auto* l1 = std::get_if<L1Term>(&term)) l1_alpha += l1->alpha;
    if (const auto* l2 = std::get_if<L2Term>(&term)) l2_alpha += l2->alpha;
    if (const auto* fg = std::get_if<FairnessGapTerm>(&term)) fairness_lambda += fg->lambda;
    if (const auto* nb = std::get_if<NormBallConstraint>(&term)) ball = nb;
  }

  LinearHypothesis cur;
  if (cfg.init) {
    if (cfg.init->w.size() != d.dim()) throw DimensionError("init dimension mismatch");
    cur = *cfg.init;
  } else {
    cur.w = Vector::Zero(d.dim());
    cur.b = 0.0;
  }
  if (ball) cur.w = project_onto_ball(cur.w, *ball);

  FitResult result;
  result.objective_trace.reserve(static_cast<std::size_t>(cfg.max_iter) + 1);
  result.best_objective = std::numeric_limits<double>::infinity();
  std::vector<double> best_so_far;
  best_so_far.reserve(static_cast<std::size_t>(cfg.max_iter) + 1);

  Vector grad_w(d.dim());
  double grad_b = 0.0;
  long t = 0;
  for (; t <= cfg.max_iter; ++t) {
    double obj = segment_risk(segs, total, cur, kind);
    obj += penalty_terms_value(d, cur, kind, reg);
    if (tilt) obj += tilt->coeff_w.dot(cur.w);
    if (!std::isfinite(obj)) throw NumericalError("objective diverged to a non-finite value");
    result.objective_trace.push_back(obj);
    if (obj < result.best_objective) {
      result.best_objective = obj;
      result.hypothesis = cur;
    }
    best_so_far.push_back(result.best_objective);

    const std::size_t n = best_so_far.size();
    if (n > 10) {
      // Best-so-far values are nonincreasing; compare across a 10-step window.
      const double best_then = best_so_far[n - 11];
      const double drop = best_then - result.best_objective;
      if (drop <= cfg.tol * std::max(std::fabs(best_then), 1e-30)) {
        result.converged = true;
        break;
      }
    }
    if (t == cfg.max_iter) break;

    segment_risk_gradient(segs, total, cur, kind, grad_w, grad_b);
    if (fairness_lambda > 0.0) {
      const PenaltyGradient fg = fairness_penalty_with_gradient(d, cur, kind);
      grad_w += fairness_lambda * fg.grad_w;
      grad_b += fairness_lambda * fg.grad_b;
    }
    if (tilt) grad_w += tilt->coeff_w;

    const double eta = cfg.step_scale / std::sqrt(static_cast<double>(t) + 1.0);
    cur.w -= eta * grad_w;
    cur.b -= eta * grad_b;
    if (l2_alpha > 0.0) cur.w /= 1.0 + 2.0 * eta * l2_alpha;
    if (l1_alpha > 0.0) cur.w = soft_threshold(cur.w, eta * l1_alpha);
    if (ball) cur.w = project_onto_ball(cur.w, *ball);
  }

  result.iterations = t;
  result.train_risk = empirical_risk(d, result.hypothesis, kind);
  return result;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Underfitting:
      return "Underfitting";
    case Verdict::Overfitting:
      return "Overfitting";
    case Verdict::Ok:
      return "Ok";
  }
  return "Ok";
}

DiagnosisReport diagnose(double train_error, double validation_error, double baseline) {
  if (!(baseline > 0.0)) throw InvalidBaselineError("baseline must be positive");
  if (!std::isfinite(train_error) || !std::isfinite(validation_error) ||
      !std::isfinite(baseline))
    throw InvalidBaselineError("diagnose requires finite inputs");
  DiagnosisReport report;
  report.train_error = train_error;
  report.validation_error = validation_error;
  report.baseline = baseline;
  if (train_error >= 1.2 * baseline) {
    report.verdict = Verdict::Underfitting;
  } else if (validation_error >= 1.2 * train_error && validation_error > baseline) {
    report.verdict = Verdict::Overfitting;
  } else {
    report.verdict = Verdict::Ok;
  }
  return report;
}

}  // namespace trusterm
