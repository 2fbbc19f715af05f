#ifndef TRUSTERM_CORE_HPP
#define TRUSTERM_CORE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trusterm/errors.hpp"

namespace trusterm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class TaskKind { Regression, BinaryClassification };

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct DataPoint {
  Vector features;
  double label = 0.0;
  std::optional<int> sensitive;  // group code, see Dataset::group_names
  double weight = 1.0;
};

// Tabular dataset. Sensitive values are stored as integer codes into
// group_names; codes are assigned by lexicographic rank of the group name so
// that the encoding does not depend on row order.
struct Dataset {
  Matrix X;                               // m x d feature matrix
  Vector y;                               // m labels
  std::optional<Eigen::VectorXi> s;       // m group codes
  Vector weights;                         // m positive weights
  std::vector<std::string> feature_names;
  std::vector<std::string> group_names;   // declared finite group set
  TaskKind task = TaskKind::Regression;
  std::string provenance;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
  double total_weight() const;
  DataPoint point(Eigen::Index i) const;
};

// Throws InvalidDatasetError (or TaskMismatchError for bad class labels)
// unless every Dataset invariant holds. `allow_zero_weights` admits the
// zero-weight rows produced by pseudo-label merging with lambda = 0.
void validate_dataset(const Dataset& d, bool allow_zero_weights = true);

struct LinearHypothesis {
  Vector w;
  double b = 0.0;
};

// Binary decision tree stored as an index-linked node pool, root at index 0.
struct TreeNode {
  int feature = -1;      // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prediction = 0.0;  // leaf payload: mean label or majority class
  long support = 0;         // training points routed to this leaf
};

struct TreeHypothesis {
  std::vector<TreeNode> nodes;

  bool empty() const { return nodes.empty(); }
  const TreeNode& root() const { return nodes.front(); }
};

enum class LossTag { Squared, Absolute, Huber, Logistic, ZeroOne };

struct LossKind {
  LossTag tag = LossTag::Squared;
  double huber_delta = 1.0;

  static LossKind squared() { return {LossTag::Squared, 1.0}; }
  static LossKind absolute() { return {LossTag::Absolute, 1.0}; }
  static LossKind huber(double delta) { return {LossTag::Huber, delta}; }
  static LossKind logistic() { return {LossTag::Logistic, 1.0}; }
  static LossKind zero_one() { return {LossTag::ZeroOne, 1.0}; }
};

// ---------------------------------------------------------------------------
// Regularizer: a list of penalty/constraint terms attached to the objective
// ---------------------------------------------------------------------------

struct L1Term {
  double alpha = 0.0;
};

struct L2Term {
  double alpha = 0.0;
};

struct NormBallConstraint {
  double radius = 1.0;
  int norm = 2;  // 1 or 2
};

struct FairnessGapTerm {
  double lambda = 0.0;
  std::string group_attr;  // documentation; the dataset's sensitive column is used
};

// Pseudo-labeled probe set whose weighted losses join the training objective.
struct SimulatabilityPenaltyTerm {
  double lambda = 0.0;
  Matrix pseudo_X;
  Vector pseudo_labels;
};

using RegularizerTerm = std::variant<L1Term, L2Term, NormBallConstraint,
                                     FairnessGapTerm, SimulatabilityPenaltyTerm>;

struct Regularizer {
  std::vector<RegularizerTerm> terms;

  Regularizer& l1(double alpha);
  Regularizer& l2(double alpha);
  Regularizer& norm_ball(double radius, int norm);
  Regularizer& fairness_gap(double lambda, std::string group_attr = {});
  Regularizer& simulatability(double lambda, Matrix pseudo_X, Vector pseudo_labels);

  // Enforces: coefficients nonnegative, at most one ball constraint.
  void validate() const;
  const NormBallConstraint* ball() const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Linear prediction w'x + b. Classification callers threshold at 0.
double predict(const LinearHypothesis& h, const Vector& x);

// Routes x through the tree and returns the leaf prediction.
double predict(const TreeHypothesis& tree, const Vector& x);

// Pointwise loss L(y, yhat). ZeroOne/Logistic require y in {-1,+1}.
double eval_loss(const LossKind& kind, double y, double yhat);

// Derivative of eval_loss with respect to yhat (subgradient for Absolute,
// with the r = 0 element chosen as 0). ZeroOne has none.
double loss_derivative(const LossKind& kind, double y, double yhat);

// Weighted mean loss over the dataset; with unit weights this is the plain
// average loss.
double empirical_risk(const Dataset& d, const LinearHypothesis& h, const LossKind& kind);

// Compensated (Kahan) accumulator used wherever sums feed tight tolerances.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace trusterm

#endif  // TRUSTERM_CORE_HPP
