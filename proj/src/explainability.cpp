#include "trusterm/explainability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace trusterm {

std::optional<double> UserOracle::lookup(const Vector& x) const {
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    if ((probes.row(i).transpose().array() == x.array()).all()) return user_labels[i];
  }
  return std::nullopt;
}

double simulatability_score(const LinearHypothesis& h, const UserOracle& oracle,
                            const LossKind& kind) {
  if (oracle.size() < 1) throw EmptyOracleError("oracle has no probes");
  if (oracle.probes.cols() != h.w.size())
    throw DimensionError("oracle probes do not match hypothesis dimension");
  if (oracle.user_labels.size() != oracle.size())
    throw DimensionError("oracle labels do not match probe count");
  KahanSum sum;
  for (Eigen::Index i = 0; i < oracle.size(); ++i) {
    const double yhat = h.w.dot(oracle.probes.row(i).transpose()) + h.b;
    sum.add(eval_loss(kind, oracle.user_labels[i], yhat));
  }
  return sum.value() / static_cast<double>(oracle.size());
}

double simulatability_penalty(const Dataset& pseudo_set, const LinearHypothesis& h,
                              const LossKind& kind) {
  if (pseudo_set.dim() != h.w.size())
    throw DimensionError("pseudo set does not match hypothesis dimension");
  KahanSum sum;
  for (Eigen::Index i = 0; i < pseudo_set.size(); ++i) {
    const double yhat = h.w.dot(pseudo_set.X.row(i).transpose()) + h.b;
    sum.add(pseudo_set.weights[i] * eval_loss(kind, pseudo_set.y[i], yhat));
  }
  return sum.value();
}

std::pair<Explanation, double> predict_with_explanation(
    const LinearHypothesis& h, const Vector& x, Eigen::Index k,
    const std::vector<std::string>& feature_names) {
  const Eigen::Index d = h.w.size();
  if (k < 1 || k > d) throw RangeError("k must lie in [1, d]");
  const double prediction = predict(h, x);

  std::vector<Contribution> all(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    auto& c = all[static_cast<std::size_t>(j)];
    c.feature = j;
    c.name = static_cast<std::size_t>(j) < feature_names.size()
                 ? feature_names[static_cast<std::size_t>(j)]
                 : "f" + std::to_string(j);
    c.value = h.w[j] * x[j];
  }
  std::stable_sort(all.begin(), all.end(), [](const Contribution& a, const Contribution& b) {
    return std::fabs(a.value) > std::fabs(b.value);
  });
  Explanation e;
  e.prediction = prediction;
  e.top_features.assign(all.begin(), all.begin() + k);
  return {e, prediction};
}

std::string explain_tree_path(const TreeHypothesis& tree, const Vector& x,
                              const std::vector<std::string>& feature_names) {
  if (tree.empty()) throw EmptyDatasetError("explain_tree_path: empty tree");
  auto name_of = [&](int j) {
    return static_cast<std::size_t>(j) < feature_names.size()
               ? feature_names[static_cast<std::size_t>(j)]
               : "f" + std::to_string(j);
  };
  std::string path;
  int idx = 0;
  char buf[48];
  for (;;) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    if (node.feature < 0) {
      std::snprintf(buf, sizeof(buf), "%g", node.prediction);
      path += "predict " + std::string(buf);
      return path;
    }
    if (node.feature >= x.size())
      throw DimensionError("explain_tree_path: feature index outside input");
    const bool go_left = x[node.feature] <= node.threshold;
    std::snprintf(buf, sizeof(buf), "%g", node.threshold);
    path += name_of(node.feature) + (go_left ? " <= " : " > ") + buf + " -> ";
    idx = go_left ? node.left : node.right;
  }
}

namespace {

// FNV-1a over the textual solver configuration.
std::string digest(const FitResult& fit, const Dataset& train, const LossKind& kind) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "m=%ld d=%ld loss=%d delta=%.17g iters=%ld best=%.17g",
                static_cast<long>(train.size()), static_cast<long>(train.dim()),
                static_cast<int>(kind.tag), kind.huber_delta, fit.iterations,
                fit.best_objective);
  std::uint64_t h = 1469598103934665603ULL;
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace

ModelCard model_card(const FitResult& fit, const Dataset& train, const Dataset& validation,
                     const LossKind& kind) {
  ModelCard card;
  card.description = "linear model, " + std::to_string(train.dim()) + " features, trained on " +
                     std::to_string(train.size()) + " points";
  card.config_digest = digest(fit, train, kind);
  card.overall_risk = empirical_risk(train, fit.hypothesis, kind);
  card.validation_error = empirical_risk(validation, fit.hypothesis, kind);
  if (train.s) {
    const FairnessReport fr = group_risk(train, fit.hypothesis, kind);
    card.per_group_risk = fr.per_group_risk;
  }
  card.limitations =
      "trained and evaluated on the datasets above only; performance on other "
      "populations is unknown";
  if (fit.randomized) card.limitations += "; parameters carry privacy noise";
  return card;
}

}  // namespace trusterm
