#ifndef TRUSTERM_EXPLAINABILITY_HPP
#define TRUSTERM_EXPLAINABILITY_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trusterm/core.hpp"
#include "trusterm/fairness.hpp"
#include "trusterm/solver.hpp"

namespace trusterm {

// Tabulated user predictions u(x) over a finite probe set.
struct UserOracle {
  Matrix probes;       // one probe per row
  Vector user_labels;  // u(probe_i)

  Eigen::Index size() const { return probes.rows(); }
  std::optional<double> lookup(const Vector& x) const;
};

struct Contribution {
  Eigen::Index feature = 0;
  std::string name;
  double value = 0.0;  // w_j * x_j
};

struct Explanation {
  std::vector<Contribution> top_features;  // |value| descending
  double prediction = 0.0;
};

struct ModelCard {
  std::string description;
  std::string config_digest;
  double overall_risk = 0.0;
  std::vector<std::pair<std::string, double>> per_group_risk;  // empty without sensitive
  double validation_error = 0.0;
  std::string limitations;
};

// Mean discrepancy between user and model predictions; lower reads as more
// explainable to this user.
double simulatability_score(const LinearHypothesis& h, const UserOracle& oracle,
                            const LossKind& kind);

// Weighted pseudo-loss sum lambda * sum L((x, u(x)), h): exactly the
// contribution the merged pseudo points make to the fit objective numerator.
double simulatability_penalty(const Dataset& pseudo_set, const LinearHypothesis& h,
                              const LossKind& kind);

std::pair<Explanation, double> predict_with_explanation(const LinearHypothesis& h,
                                                        const Vector& x, Eigen::Index k,
                                                        const std::vector<std::string>&
                                                            feature_names = {});

// Root-to-leaf rule path as text, e.g. "f0 <= 3 -> f1 > 6.5 -> predict -1".
std::string explain_tree_path(const TreeHypothesis& tree, const Vector& x,
                              const std::vector<std::string>& feature_names = {});

ModelCard model_card(const FitResult& fit, const Dataset& train, const Dataset& validation,
                     const LossKind& kind);

}  // namespace trusterm

#endif  // TRUSTERM_EXPLAINABILITY_HPP
