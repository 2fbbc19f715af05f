#include "trusterm/core.hpp"

#include <cmath>

#include "trusterm/rng.hpp"

namespace trusterm {

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw RangeError("inverse_normal_cdf: p must lie in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement step.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double Dataset::total_weight() const {
  KahanSum s;
  for (Eigen::Index i = 0; i < weights.size(); ++i) s.add(weights[i]);
  return s.value();
}

DataPoint Dataset::point(Eigen::Index i) const {
  DataPoint p;
  p.features = X.row(i).transpose();
  p.label = y[i];
  if (s) p.sensitive = (*s)[i];
  p.weight = weights[i];
  return p;
}

void validate_dataset(const Dataset& d, bool allow_zero_weights) {
  const Eigen::Index m = d.X.rows();
  if (m < 1) throw EmptyDatasetError("dataset has no rows");
  if (d.y.size() != m) throw InvalidDatasetError("label count does not match row count");
  if (d.weights.size() != m) throw InvalidDatasetError("weight count does not match row count");
  if (d.s && d.s->size() != m)
    throw InvalidDatasetError("sensitive count does not match row count");
  if (!d.feature_names.empty() &&
      static_cast<Eigen::Index>(d.feature_names.size()) != d.X.cols())
    throw InvalidDatasetError("feature name count does not match column count");
  if (!d.X.allFinite() || !d.y.allFinite() || !d.weights.allFinite())
    throw InvalidDatasetError("dataset contains non-finite entries");
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w = d.weights[i];
    if (w < 0.0 || (!allow_zero_weights && w == 0.0))
      throw InvalidDatasetError("nonpositive weight at row " + std::to_string(i));
  }
  if (d.task == TaskKind::BinaryClassification) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (d.y[i] != 1.0 && d.y[i] != -1.0)
        throw TaskMismatchError("classification label not in {-1,+1} at row " +
                                std::to_string(i));
    }
  }
  if (d.s) {
    const int g = static_cast<int>(d.group_names.size());
    if (g == 0) throw InvalidDatasetError("sensitive column present but no group set declared");
    for (Eigen::Index i = 0; i < m; ++i) {
      const int code = (*d.s)[i];
      if (code < 0 || code >= g)
        throw InvalidDatasetError("sensitive code outside declared group set at row " +
                                  std::to_string(i));
    }
  }
}

Regularizer& Regularizer::l1(double alpha) {
  terms.push_back(L1Term{alpha});
  return *this;
}

Regularizer& Regularizer::l2(double alpha) {
  terms.push_back(L2Term{alpha});
  return *this;
}

Regularizer& Regularizer::norm_ball(double radius, int norm) {
  terms.push_back(NormBallConstraint{radius, norm});
  return *this;
}

Regularizer& Regularizer::fairness_gap(double lambda, std::string group_attr) {
  terms.push_back(FairnessGapTerm{lambda, std::move(group_attr)});
  return *this;
}

Regularizer& Regularizer::simulatability(double lambda, Matrix pseudo_X, Vector pseudo_labels) {
  terms.push_back(SimulatabilityPenaltyTerm{lambda, std::move(pseudo_X), std::move(pseudo_labels)});
  return *this;
}

void Regularizer::validate() const {
  int balls = 0;
  for (const auto& term : terms) {
    if (const auto* l1 = std::get_if<L1Term>(&term)) {
      if (l1->alpha < 0.0) throw ConfigError("L1 coefficient must be nonnegative");
    } else if (const auto* l2 = std::get_if<L2Term>(&term)) {
      if (l2->alpha < 0.0) throw ConfigError("L2 coefficient must be nonnegative");
    } else if (const auto* ball = std::get_if<NormBallConstraint>(&term)) {
      ++balls;
      if (ball->radius <= 0.0) throw ConfigError("ball radius must be positive");
      if (ball->norm != 1 && ball->norm != 2) throw ConfigError("ball norm must be 1 or 2");
    } else if (const auto* fg = std::get_if<FairnessGapTerm>(&term)) {
      if (fg->lambda < 0.0) throw ConfigError("fairness coefficient must be nonnegative");
    } else if (const auto* sp = std::get_if<SimulatabilityPenaltyTerm>(&term)) {
      if (sp->lambda < 0.0) throw ConfigError("simulatability coefficient must be nonnegative");
      if (sp->pseudo_X.rows() != sp->pseudo_labels.size())
        throw DimensionError("pseudo set rows do not match pseudo label count");
    }
  }
  if (balls > 1) throw ConfigError("at most one norm-ball constraint is allowed");
}

const NormBallConstraint* Regularizer::ball() const {
  for (const auto& term : terms) {
    if (const auto* b = std::get_if<NormBallConstraint>(&term)) return b;
  }
  return nullptr;
}

double predict(const LinearHypothesis& h, const Vector& x) {
  if (x.size() != h.w.size())
    throw DimensionError("predict: feature length " + std::to_string(x.size()) +
                         " does not match weight length " + std::to_string(h.w.size()));
  return h.w.dot(x) + h.b;
}

double predict(const TreeHypothesis& tree, const Vector& x) {
  if (tree.empty()) throw EmptyDatasetError("predict: empty tree");
  int idx = 0;
  for (;;) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    if (node.feature < 0) return node.prediction;
    if (node.feature >= x.size())
      throw DimensionError("predict: tree splits on feature outside input dimension");
    idx = x[node.feature] <= node.threshold ? node.left : node.right;
  }
}

namespace {

void require_class_label(double y) {
  if (y != 1.0 && y != -1.0)
    throw TaskMismatchError("margin losses require labels in {-1,+1}");
}

// log(1 + exp(t)) without overflow.
double log1p_exp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

}  // namespace

double eval_loss(const LossKind& kind, double y, double yhat) {
  switch (kind.tag) {
    case LossTag::Squared: {
      const double r = y - yhat;
      return r * r;
    }
    case LossTag::Absolute:
      return std::fabs(y - yhat);
    case LossTag::Huber: {
      const double delta = kind.huber_delta;
      if (delta <= 0.0) throw ConfigError("Huber delta must be positive");
      const double r = std::fabs(y - yhat);
      if (r <= delta) return 0.5 * r * r;
      return delta * (r - 0.5 * delta);
    }
    case LossTag::Logistic:
      require_class_label(y);
      return log1p_exp(-y * yhat);
    case LossTag::ZeroOne:
      require_class_label(y);
      return y * yhat <= 0.0 ? 1.0 : 0.0;
  }
  throw ConfigError("unknown loss");
}

double loss_derivative(const LossKind& kind, double y, double yhat) {
  switch (kind.tag) {
    case LossTag::Squared:
      return -2.0 * (y - yhat);
    case LossTag::Absolute: {
      const double r = y - yhat;
      if (r > 0.0) return -1.0;
      if (r < 0.0) return 1.0;
      return 0.0;  // subgradient element at the kink
    }
    case LossTag::Huber: {
      const double delta = kind.huber_delta;
      const double r = y - yhat;
      if (std::fabs(r) <= delta) return -r;
      return r > 0.0 ? -delta : delta;
    }
    case LossTag::Logistic: {
      require_class_label(y);
      const double t = -y * yhat;
      // d/dyhat log(1+exp(-y yhat)) = -y sigma(-y yhat)
      const double sigma = t > 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
      return -y * sigma;
    }
    case LossTag::ZeroOne:
      throw UnsupportedTrainingLossError("zero-one loss has no usable derivative");
  }
  throw ConfigError("unknown loss");
}

double empirical_risk(const Dataset& d, const LinearHypothesis& h, const LossKind& kind) {
  if (d.size() < 1) throw EmptyDatasetError("empirical_risk: empty dataset");
  if (d.dim() != h.w.size()) throw DimensionError("empirical_risk: dimension mismatch");
  KahanSum num;
  KahanSum den;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double yhat = h.w.dot(d.X.row(i).transpose()) + h.b;
    num.add(d.weights[i] * eval_loss(kind, d.y[i], yhat));
    den.add(d.weights[i]);
  }
  const double total = den.value();
  if (total <= 0.0) throw InvalidDatasetError("empirical_risk: total weight is zero");
  return num.value() / total;
}

}  // namespace trusterm
