#ifndef TRUSTERM_ROBUSTNESS_HPP
#define TRUSTERM_ROBUSTNESS_HPP

#include <optional>
#include <variant>

#include "trusterm/core.hpp"

namespace trusterm {

enum class BallNorm { L2, LInf };

// Per-point feature ball ||delta||_p <= epsilon, labels untouched.
struct PerPointBall {
  BallNorm norm = BallNorm::L2;
  double epsilon = 0.0;

  static PerPointBall l2(double eps) { return {BallNorm::L2, eps}; }
  static PerPointBall linf(double eps) { return {BallNorm::LInf, eps}; }
};

// Coupled per-column l1 budget on the feature matrix.
struct CoupledColumnL1 {
  double eta = 0.0;
};

using UncertaintyModel = std::variant<PerPointBall, CoupledColumnL1>;

struct RobustnessReport {
  double clean_risk = 0.0;
  double robust_risk = 0.0;
  double empirical_lipschitz = 0.0;
  std::optional<double> min_local_radius;  // classification only
  UncertaintyModel budget;
};

// Dual norm of the ball's p-norm applied to w: ||w||_1 for p=inf, ||w||_2
// for p=2. The margin shift achievable by the worst perturbation.
double dual_norm(const PerPointBall& ball, const Vector& w);

// sup over the ball of L(y, h(x + delta)); closed form for linear h.
double robust_pointwise_loss(const LossKind& kind, const PerPointBall& ball,
                             const LinearHypothesis& h, const Vector& x, double y);

// Exact supremum of the absolute-loss sum over the coupled column-l1 set,
// by enumerating extreme points. The inner objective is convex in the
// perturbation, so the supremum over the polytope is attained at a vertex;
// enumeration over vertices is therefore exhaustive. Test-scale only.
double adversarial_objective_bruteforce(const Dataset& d, const LinearHypothesis& h, double eta);

// Closed-form counterpart: sum |y_i - w'x_i - b| + eta ||w||_1.
double robust_lad_objective(const Dataset& d, const LinearHypothesis& h, double eta);

// 1 iff some point of the ball around x is misclassified.
double robust_zero_one(const LinearHypothesis& h, const Vector& x, double y,
                       const PerPointBall& ball);

// D plus one worst-case perturbed copy per point (original labels).
Dataset adversarial_training_set(const Dataset& d, const LinearHypothesis& h,
                                 const LossKind& kind, const PerPointBall& ball);

// max over probe pairs of |h(x) - h(x')| / ||x - x'||_2.
double empirical_lipschitz(const LinearHypothesis& h, const Matrix& probes_a,
                           const Matrix& probes_b);
double empirical_lipschitz(const TreeHypothesis& h, const Matrix& probes_a,
                           const Matrix& probes_b);

// Largest epsilon such that every x' with ||x - x'|| <= epsilon keeps the
// predicted class: |w'x + b| / ||w||_2 for linear classifiers.
double local_robustness_radius(const LinearHypothesis& h, const Vector& x);

// Summary report over a dataset under a per-point ball budget.
RobustnessReport robustness_report(const Dataset& d, const LinearHypothesis& h,
                                   const LossKind& kind, const PerPointBall& ball);

}  // namespace trusterm

#endif  // TRUSTERM_ROBUSTNESS_HPP
