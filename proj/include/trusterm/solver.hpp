#ifndef TRUSTERM_SOLVER_HPP
#define TRUSTERM_SOLVER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trusterm/core.hpp"

namespace trusterm {

struct SolverConfig {
  long max_iter = 5000;
  double step_scale = 0.1;  // eta_t = step_scale / sqrt(t + 1)
  double tol = 1e-8;        // relative best-objective change over a 10-iteration window
  std::uint64_t seed = 0;
  std::optional<LinearHypothesis> init;  // absent = zero init
};

struct FitResult {
  LinearHypothesis hypothesis;  // best iterate by objective
  std::vector<double> objective_trace;
  double best_objective = 0.0;
  long iterations = 0;
  bool converged = false;
  double train_risk = 0.0;
  bool randomized = false;  // set by privacy mechanisms that add noise
};

enum class Verdict { Underfitting, Overfitting, Ok };

struct DiagnosisReport {
  double train_error = 0.0;
  double validation_error = 0.0;
  double baseline = 0.0;
  Verdict verdict = Verdict::Ok;
};

const char* to_string(Verdict v);

// Optional linear term q'w added to the objective; used by differentially
// private objective perturbation.
struct ObjectiveTilt {
  Vector coeff_w;
};

// Minimizes the weighted empirical risk plus regularizer terms by proximal
// subgradient descent with a diminishing step schedule, returning the best
// iterate seen. Deterministic given (d, kind, reg, cfg).
FitResult erm_fit(const Dataset& d, const LossKind& kind, const Regularizer& reg,
                  const SolverConfig& cfg = {},
                  const std::optional<ObjectiveTilt>& tilt = std::nullopt);

// Penalized objective at h: weighted risk (with pseudo-labeled points folded
// into the weighted mean), penalty terms, and a +infinity indicator for a
// violated ball constraint.
double objective_value(const Dataset& d, const LinearHypothesis& h, const LossKind& kind,
                       const Regularizer& reg,
                       const std::optional<ObjectiveTilt>& tilt = std::nullopt);

// Fixed-rule comparison of train/validation error against a baseline.
DiagnosisReport diagnose(double train_error, double validation_error, double baseline);

// Euclidean or l1-ball projection, exposed for reuse and property tests.
Vector project_onto_ball(const Vector& w, const NormBallConstraint& ball);

// Elementwise soft-threshold, the proximal map of t*||w||_1.
Vector soft_threshold(const Vector& w, double t);

}  // namespace trusterm

#endif  // TRUSTERM_SOLVER_HPP
