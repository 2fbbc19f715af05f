#include "trusterm/fairness.hpp"

#include <cmath>

#include "trusterm/solver.hpp"

namespace trusterm {

namespace {

struct GroupAccumulators {
  std::vector<long> counts;
  std::vector<double> weight;
  std::vector<double> loss;
};

void require_groups(const Dataset& d) {
  if (!d.s) throw MissingSensitiveError("operation requires a sensitive attribute");
  if (d.group_names.empty()) throw MissingSensitiveError("no group set declared");
}

GroupAccumulators accumulate_group_losses(const Dataset& d, const LinearHypothesis& h,
                                          const LossKind& kind) {
  require_groups(d);
  const int g = static_cast<int>(d.group_names.size());
  std::vector<KahanSum> weight(g), loss(g);
  std::vector<long> counts(g, 0);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const int code = (*d.s)[i];
    const double yhat = h.w.dot(d.X.row(i).transpose()) + h.b;
    counts[code] += 1;
    weight[code].add(d.weights[i]);
    loss[code].add(d.weights[i] * eval_loss(kind, d.y[i], yhat));
  }
  GroupAccumulators acc;
  acc.counts = std::move(counts);
  acc.weight.resize(g);
  acc.loss.resize(g);
  for (int k = 0; k < g; ++k) {
    if (acc.counts[k] == 0)
      throw EmptyGroupError("group '" + d.group_names[k] + "' has no members");
    acc.weight[k] = weight[k].value();
    acc.loss[k] = loss[k].value();
  }
  return acc;
}

// Linear probe for proxy leakage: can the sensitive column be predicted from
// the remaining features? Only run for binary group sets.
double probe_sensitive_accuracy(const Dataset& d) {
  if (!d.s || d.group_names.size() != 2 || d.size() < 4) return 0.0;
  Dataset probe;
  probe.X = d.X;
  probe.y.resize(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) probe.y[i] = (*d.s)[i] == 0 ? -1.0 : 1.0;
  probe.weights = Vector::Ones(d.size());
  probe.task = TaskKind::BinaryClassification;
  SolverConfig cfg;
  cfg.max_iter = 400;
  cfg.step_scale = 0.5;
  const FitResult fit = erm_fit(probe, LossKind::logistic(), Regularizer{}, cfg);
  long correct = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double score = fit.hypothesis.w.dot(d.X.row(i).transpose()) + fit.hypothesis.b;
    if (probe.y[i] * score > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

}  // namespace

FairnessReport group_risk(const Dataset& d, const LinearHypothesis& h, const LossKind& kind) {
  if (d.dim() != h.w.size()) throw DimensionError("group_risk: dimension mismatch");
  const GroupAccumulators acc = accumulate_group_losses(d, h, kind);
  FairnessReport report;
  const int g = static_cast<int>(acc.counts.size());
  std::vector<double> risks(g);
  for (int k = 0; k < g; ++k) {
    risks[k] = acc.loss[k] / acc.weight[k];
    report.per_group_risk.emplace_back(d.group_names[k], risks[k]);
  }
  double gap = 0.0;
  for (int a = 0; a < g; ++a)
    for (int b = a + 1; b < g; ++b) gap = std::max(gap, std::fabs(risks[a] - risks[b]));
  report.max_gap = gap;
  report.weights_applied = (d.weights.array() != 1.0).any();
  return report;
}

Vector sample_weights(const Dataset& d) {
  require_groups(d);
  const int g = static_cast<int>(d.group_names.size());
  std::vector<long> counts(g, 0);
  for (Eigen::Index i = 0; i < d.size(); ++i) counts[(*d.s)[i]] += 1;
  for (int k = 0; k < g; ++k)
    if (counts[k] == 0) throw EmptyGroupError("group '" + d.group_names[k] + "' has no members");
  const double m = static_cast<double>(d.size());
  Vector w(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    w[i] = m / (static_cast<double>(g) * static_cast<double>(counts[(*d.s)[i]]));
  return w;
}

double fairness_penalty(const Dataset& d, const LinearHypothesis& h, const LossKind& kind) {
  const GroupAccumulators acc = accumulate_group_losses(d, h, kind);
  const int g = static_cast<int>(acc.counts.size());
  double penalty = 0.0;
  for (int a = 0; a < g; ++a) {
    for (int b = a + 1; b < g; ++b) {
      const double gap = acc.loss[a] / acc.weight[a] - acc.loss[b] / acc.weight[b];
      penalty += gap * gap;
    }
  }
  return penalty;
}

PenaltyGradient fairness_penalty_with_gradient(const Dataset& d, const LinearHypothesis& h,
                                               const LossKind& kind) {
  if (kind.tag == LossTag::ZeroOne)
    throw UnsupportedTrainingLossError("fairness penalty needs a differentiable loss");
  require_groups(d);
  const int g = static_cast<int>(d.group_names.size());
  const Eigen::Index dim = d.dim();
  std::vector<KahanSum> weight(g), loss(g);
  std::vector<long> counts(g, 0);
  Matrix grad_w_num = Matrix::Zero(dim, g);
  Vector grad_b_num = Vector::Zero(g);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const int code = (*d.s)[i];
    const double yhat = h.w.dot(d.X.row(i).transpose()) + h.b;
    const double wt = d.weights[i];
    counts[code] += 1;
    weight[code].add(wt);
    loss[code].add(wt * eval_loss(kind, d.y[i], yhat));
    const double coef = wt * loss_derivative(kind, d.y[i], yhat);
    grad_w_num.col(code) += coef * d.X.row(i).transpose();
    grad_b_num[code] += coef;
  }
  std::vector<double> risk(g);
  for (int k = 0; k < g; ++k) {
    if (counts[k] == 0) throw EmptyGroupError("group '" + d.group_names[k] + "' has no members");
    risk[k] = loss[k].value() / weight[k].value();
    grad_w_num.col(k) /= weight[k].value();
    grad_b_num[k] /= weight[k].value();
  }
  PenaltyGradient out;
  out.grad_w = Vector::Zero(dim);
  for (int a = 0; a < g; ++a) {
    for (int b = a + 1; b < g; ++b) {
      const double gap = risk[a] - risk[b];
      out.value += gap * gap;
      out.grad_w += 2.0 * gap * (grad_w_num.col(a) - grad_w_num.col(b));
      out.grad_b += 2.0 * gap * (grad_b_num[a] - grad_b_num[b]);
    }
  }
  return out;
}

FairnessReport individual_fairness_audit(const LinearHypothesis& h, const Dataset& d,
                                         const std::vector<Eigen::Index>& masked_features,
                                         double tau_d, double tau_out) {
  if (!(tau_d > 0.0)) throw RangeError("tau_d must be positive");
  if (tau_out < 0.0) throw RangeError("tau_out must be nonnegative");
  if (d.dim() != h.w.size()) throw DimensionError("audit: dimension mismatch");
  std::vector<bool> masked(static_cast<std::size_t>(d.dim()), false);
  for (Eigen::Index j : masked_features) {
    if (j < 0 || j >= d.dim()) throw RangeError("masked feature index out of range");
    masked[static_cast<std::size_t>(j)] = true;
  }
  Eigen::Index unmasked = 0;
  for (bool b : masked)
    if (!b) ++unmasked;
  if (unmasked == 0) throw DegenerateMetricError("similarity metric has no coordinates left");

  FairnessReport report;
  Vector preds(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    preds[i] = h.w.dot(d.X.row(i).transpose()) + h.b;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    for (Eigen::Index j = i + 1; j < d.size(); ++j) {
      double dist2 = 0.0;
      for (Eigen::Index k = 0; k < d.dim(); ++k) {
        if (masked[static_cast<std::size_t>(k)]) continue;
        const double delta = d.X(i, k) - d.X(j, k);
        dist2 += delta * delta;
      }
      const double dist = std::sqrt(dist2);
      const double gap = std::fabs(preds[i] - preds[j]);
      if (dist <= tau_d && gap > tau_out)
        report.individual_violations.push_back({i, j, dist, gap});
    }
  }
  report.weights_applied = (d.weights.array() != 1.0).any();
  report.proxy_accuracy = probe_sensitive_accuracy(d);
  report.proxy_leakage_warning = report.proxy_accuracy > 0.75;
  return report;
}

}  // namespace trusterm
