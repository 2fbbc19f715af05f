#ifndef TRUSTERM_FAIRNESS_HPP
#define TRUSTERM_FAIRNESS_HPP

#include <string>
#include <utility>
#include <vector>

#include "trusterm/core.hpp"

namespace trusterm {

struct PairViolation {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double distance = 0.0;
  double output_gap = 0.0;
};

struct FairnessReport {
  std::vector<std::pair<std::string, double>> per_group_risk;  // ordered by group code
  double max_gap = 0.0;
  bool weights_applied = false;
  std::vector<PairViolation> individual_violations;
  // Set when a linear probe predicts the sensitive column from the remaining
  // features with accuracy above 0.75 (proxy leakage; reported, not certified).
  bool proxy_leakage_warning = false;
  double proxy_accuracy = 0.0;
};

// Weighted mean loss per sensitive group and the largest pairwise gap.
FairnessReport group_risk(const Dataset& d, const LinearHypothesis& h, const LossKind& kind);

// Inverse-frequency weights m / (G * m_g): every group ends up with total
// weight m/G.
Vector sample_weights(const Dataset& d);

// Sum of squared per-group risk gaps over unordered group pairs.
double fairness_penalty(const Dataset& d, const LinearHypothesis& h, const LossKind& kind);

struct PenaltyGradient {
  double value = 0.0;
  Vector grad_w;
  double grad_b = 0.0;
};

PenaltyGradient fairness_penalty_with_gradient(const Dataset& d, const LinearHypothesis& h,
                                               const LossKind& kind);

// Flags pairs that are close under the sensitive-blind metric (Euclidean on
// unmasked coordinates) yet receive predictions differing by more than
// tau_out.
FairnessReport individual_fairness_audit(const LinearHypothesis& h, const Dataset& d,
                                         const std::vector<Eigen::Index>& masked_features,
                                         double tau_d, double tau_out);

}  // namespace trusterm

#endif  // TRUSTERM_FAIRNESS_HPP
