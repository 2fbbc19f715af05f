#ifndef TRUSTERM_PRIVACY_HPP
#define TRUSTERM_PRIVACY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "trusterm/core.hpp"
#include "trusterm/solver.hpp"

namespace trusterm {

// Zero-mean joint Gaussian over (x in R^d, s, y), given blockwise.
struct GaussianModel {
  Matrix sigma_xx;  // d x d
  Vector c_xs;      // d
  Vector c_xy;      // d
  double var_s = 1.0;
  double var_y = 1.0;
  double cov_sy = 0.0;

  Eigen::Index dim() const { return sigma_xx.rows(); }
  Matrix joint_covariance() const;
  // Throws NotPositiveDefiniteError unless the joint covariance is SPD.
  void validate() const;
};

struct LinearFeatureMap {
  Matrix F;  // d' x d
};

struct PrivateMapResult {
  LinearFeatureMap map;
  bool no_leakage = false;  // c was zero: s already uncorrelated
};

struct OutputPerturbation {
  double scale = 1.0;
};

struct ObjectivePerturbation {};

struct DPParams {
  double epsilon = 1.0;
  double delta = 0.0;
  std::variant<OutputPerturbation, ObjectivePerturbation> mechanism = OutputPerturbation{};
  std::uint64_t seed = 0;
};

enum class MiTarget { Sensitive, Label };

struct FunnelPoint {
  Vector direction;  // unit vector, rank-1 feature map f'x
  double mi_sensitive = 0.0;  // I(s; f'x), nats
  double mi_label = 0.0;      // I(y; f'x), nats
};

struct FunnelResult {
  std::vector<FunnelPoint> frontier;  // ascending mi_label, mi_sensitive nondecreasing
  // min I(s;z) subject to I(y;z) >= threshold; +inf if unattained.
  double value_at(double threshold) const;
};

struct DpAuditReport {
  std::string mechanism;
  double epsilon_claimed = 0.0;
  double epsilon_estimate = 0.0;  // +inf when supports separate
  double delta = 0.0;
  long trials = 0;
  int bins = 0;
  double slack = 0.0;
  bool pass = false;
};

// Scalar-output randomized mechanism: (dataset, trial seed) -> first output
// coordinate.
using Mechanism = std::function<double(const Dataset&, std::uint64_t)>;

// Empirical cross-covariance (1/m) sum (x_i - xbar)(s_i - sbar). Requires a
// numeric-codable sensitive column; binary groups use their {0,1} codes.
Vector cross_covariance(const Dataset& d);

// Eq.-style projection F = I - c c'/||c||^2: rows orthogonal to c.
PrivateMapResult private_linear_map(const Vector& c);

// Minimum expected squared error of any linear reconstruction of s from Fx.
double reconstruction_mse(const GaussianModel& model, const LinearFeatureMap& map);

// Replaces features by z = Fx; privacy-by-feature-selection composes this
// with a fit on the transformed dataset.
Dataset apply_feature_map(const Dataset& d, const LinearFeatureMap& map);

// I(target; f'x) = -1/2 log(1 - rho^2) for the scalar projection.
double gaussian_mi(const GaussianModel& model, const Vector& f, MiTarget target);

// Sweeps rank-1 directions (angular grid for d=2, Halton sphere points
// otherwise, plus analytic candidates) and returns the leakage/utility
// Pareto frontier.
FunnelResult privacy_funnel_sweep(const GaussianModel& model, int num_directions,
                                  std::uint64_t seed);

// Adds iid Laplace(scale) noise to every coordinate of (w, b).
FitResult dp_output_perturb(const FitResult& fit, double scale, std::uint64_t seed);

// Random linear tilt with density prop. to exp(-(epsilon/2) ||b||): uniform
// direction times Gamma(d, 2/epsilon) radius, then solve the tilted ERM.
FitResult dp_objective_perturb(const Dataset& d, const LossKind& kind, const Regularizer& reg,
                               double epsilon, const SolverConfig& cfg, std::uint64_t seed);

// Fits privately with whichever mechanism the parameters select. The
// mechanism parameters are reported as configured; no certified (eps, delta)
// is claimed.
FitResult private_fit(const Dataset& d, const LossKind& kind, const Regularizer& reg,
                      const DPParams& params, const SolverConfig& cfg);

// Monte-Carlo necessary-condition check of the DP inequality on a histogram
// of the mechanism's output. Not a proof.
DpAuditReport dp_audit(const Mechanism& mechanism, const std::string& mechanism_name,
                       const Dataset& d, const Dataset& d_neighbor, double epsilon_claimed,
                       long trials, int bins, std::uint64_t seed);

// Clamped-mean query with Laplace noise; scale = sensitivity/epsilon gives a
// textbook epsilon-DP mechanism, scale = 0 a deliberately broken one.
Mechanism make_laplace_mean_mechanism(double lo, double hi, double scale);

struct FeatureInterval {
  double lo;
  double hi;
};

struct FlaggedLeaf {
  int node_index = 0;
  long support = 0;
  std::vector<FeatureInterval> region;  // one interval per feature
};

// Greedy CART: Gini impurity for classification, sum of squared deviations
// for regression; thresholds at midpoints of consecutive sorted unique
// values; ties broken by lowest feature index, then smallest threshold.
TreeHypothesis fit_tree(const Dataset& d, int max_depth, long min_leaf);

// Recomputes leaf support counts by routing d through the tree.
void recount_support(TreeHypothesis& tree, const Dataset& d);

// Leaves whose decision region holds fewer than k training points.
std::vector<FlaggedLeaf> audit_tree_regions(const TreeHypothesis& tree, const Dataset& d,
                                            long k);

}  // namespace trusterm

#endif  // TRUSTERM_PRIVACY_HPP
