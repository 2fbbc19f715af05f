#include "trusterm/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trusterm/rng.hpp"

namespace trusterm {

Matrix GaussianModel::joint_covariance() const {
  const Eigen::Index d = dim();
  if (sigma_xx.cols() != d || c_xs.size() != d || c_xy.size() != d)
    throw DimensionError("GaussianModel blocks have inconsistent dimensions");
  Matrix joint(d + 2, d + 2);
  joint.topLeftCorner(d, d) = sigma_xx;
  joint.block(0, d, d, 1) = c_xs;
  joint.block(0, d + 1, d, 1) = c_xy;
  joint.block(d, 0, 1, d) = c_xs.transpose();
  joint.block(d + 1, 0, 1, d) = c_xy.transpose();
  joint(d, d) = var_s;
  joint(d, d + 1) = cov_sy;
  joint(d + 1, d) = cov_sy;
  joint(d + 1, d + 1) = var_y;
  return joint;
}

void GaussianModel::validate() const {
  const Matrix joint = joint_covariance();
  if ((joint - joint.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw NotPositiveDefiniteError("joint covariance is not symmetric");
  Eigen::LLT<Matrix> llt(joint);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefiniteError("joint covariance is not positive definite");
}

Vector cross_covariance(const Dataset& d) {
  if (!d.s) throw MissingSensitiveError("cross_covariance needs a sensitive column");
  if (d.size() < 2) throw EmptyDatasetError("cross_covariance needs at least two rows");
  Vector s_values(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const std::string& name = d.group_names[static_cast<std::size_t>((*d.s)[i])];
    char* end = nullptr;
    const double parsed = std::strtod(name.c_str(), &end);
    // Numeric group names carry their own value; otherwise the code is used
    // (binary groups then read as {0,1}).
    s_values[i] = (end != name.c_str() && *end == '\0') ? parsed
                                                        : static_cast<double>((*d.s)[i]);
  }
  const double m = static_cast<double>(d.size());
  Vector x_mean(d.dim());
  for (Eigen::Index j = 0; j < d.dim(); ++j) {
    KahanSum sum;
    for (Eigen::Index i = 0; i < d.size(); ++i) sum.add(d.X(i, j));
    x_mean[j] = sum.value() / m;
  }
  KahanSum s_sum;
  for (Eigen::Index i = 0; i < d.size(); ++i) s_sum.add(s_values[i]);
  const double s_mean = s_sum.value() / m;

  Vector c(d.dim());
  for (Eigen::Index j = 0; j < d.dim(); ++j) {
    KahanSum sum;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      sum.add((d.X(i, j) - x_mean[j]) * (s_values[i] - s_mean));
    c[j] = sum.value() / m;
  }
  return c;
}

PrivateMapResult private_linear_map(const Vector& c) {
  const Eigen::Index d = c.size();
  PrivateMapResult result;
  const double n2 = c.squaredNorm();
  if (n2 == 0.0) {
    result.map.F = Matrix::Identity(d, d);
    result.no_leakage = true;
    return result;
  }
  result.map.F = Matrix::Identity(d, d) - (c * c.transpose()) / n2;
  return result;
}

double reconstruction_mse(const GaussianModel& model, const LinearFeatureMap& map) {
  model.validate();
  if (map.F.cols() != model.dim())
    throw DimensionError("feature map dimension does not match model");
  const Vector c_f = map.F * model.c_xs;
  const Matrix m = map.F * model.sigma_xx * map.F.transpose();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  const Vector z = cod.solve(c_f);  // pseudo-inverse solve
  return model.var_s - c_f.dot(z);
}

Dataset apply_feature_map(const Dataset& d, const LinearFeatureMap& map) {
  if (map.F.cols() != d.dim())
    throw DimensionError("feature map dimension does not match dataset");
  Dataset out = d;
  out.X = d.X * map.F.transpose();
  out.feature_names.clear();
  for (Eigen::Index j = 0; j < map.F.rows(); ++j)
    out.feature_names.push_back("z" + std::to_string(j));
  return out;
}

double gaussian_mi(const GaussianModel& model, const Vector& f, MiTarget target) {
  model.validate();
  if (f.size() != model.dim()) throw DimensionError("direction dimension mismatch");
  const double var_z = f.dot(model.sigma_xx * f);
  if (var_z <= 0.0) throw NotPositiveDefiniteError("projection has nonpositive variance");
  const double var_t = target == MiTarget::Sensitive ? model.var_s : model.var_y;
  const double cov = target == MiTarget::Sensitive ? f.dot(model.c_xs) : f.dot(model.c_xy);
  const double rho2 = (cov * cov) / (var_t * var_z);
  if (rho2 >= 1.0 - 1e-12)
    throw InfiniteMIError("projection is deterministically related to the target");
  return std::max(0.0, -0.5 * std::log1p(-rho2));
}

namespace {

void add_direction(std::vector<Vector>& dirs, Vector v) {
  const double n = v.norm();
  if (n <= 0.0 || !v.allFinite()) return;
  dirs.push_back(v / n);
}

std::vector<Vector> sweep_directions(const GaussianModel& model, int num_directions,
                                     std::uint64_t seed) {
  const Eigen::Index d = model.dim();
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<std::size_t>(num_directions) + 4);
  if (d == 2) {
    // Antipodal directions give the same rank-1 map, so [0, pi) covers all.
    for (int k = 0; k < num_directions; ++k) {
      const double theta = M_PI * static_cast<double>(k) / static_cast<double>(num_directions);
      Vector v(2);
      v << std::cos(theta), std::sin(theta);
      dirs.push_back(v);
    }
  } else {
    static const std::uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    const std::uint64_t offset = (seed % 4096) + 1;
    for (int k = 0; k < num_directions; ++k) {
      Vector v(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const double u = radical_inverse(offset + static_cast<std::uint64_t>(k),
                                         primes[static_cast<std::size_t>(j) % 12]);
        v[j] = inverse_normal_cdf(std::min(std::max(u, 1e-12), 1.0 - 1e-12));
      }
      add_direction(dirs, v);
    }
  }
  // Analytic candidates: the utility direction, its component orthogonal to
  // the leakage direction, the leakage direction itself, and (d=2) the exact
  // perpendicular of c_xs.
  add_direction(dirs, model.c_xy);
  const double cn = model.c_xs.squaredNorm();
  if (cn > 0.0)
    add_direction(dirs, model.c_xy - (model.c_xy.dot(model.c_xs) / cn) * model.c_xs);
  add_direction(dirs, model.c_xs);
  if (d == 2 && cn > 0.0) {
    Vector perp(2);
    perp << -model.c_xs[1], model.c_xs[0];
    add_direction(dirs, perp);
  }
  return dirs;
}

}  // namespace

double FunnelResult::value_at(double threshold) const {
  for (const auto& p : frontier) {
    if (p.mi_label >= threshold) return p.mi_sensitive;
  }
  return std::numeric_limits<double>::infinity();
}

FunnelResult privacy_funnel_sweep(const GaussianModel& model, int num_directions,
                                  std::uint64_t seed) {
  if (num_directions < 8) throw ConfigError("need at least 8 directions");
  model.validate();
  std::vector<FunnelPoint> points;
  for (const Vector& f : sweep_directions(model, num_directions, seed)) {
    FunnelPoint p;
    p.direction = f;
    try {
      p.mi_sensitive = gaussian_mi(model, f, MiTarget::Sensitive);
      p.mi_label = gaussian_mi(model, f, MiTarget::Label);
    } catch (const InfiniteMIError&) {
      continue;  // deterministic projections cannot sit on the funnel curve
    }
    points.push_back(std::move(p));
  }
  // Pareto sweep: descending utility, keep strict leakage improvements.
  std::sort(points.begin(), points.end(), [](const FunnelPoint& a, const FunnelPoint& b) {
    if (a.mi_label != b.mi_label) return a.mi_label > b.mi_label;
    return a.mi_sensitive < b.mi_sensitive;
  });
  FunnelResult result;
  double best_leakage = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.mi_sensitive < best_leakage) {
      best_leakage = p.mi_sensitive;
      result.frontier.push_back(p);
    }
  }
  std::reverse(result.frontier.begin(), result.frontier.end());
  return result;
}

FitResult dp_output_perturb(const FitResult& fit, double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw ConfigError("noise scale must be positive");
  FitResult noisy = fit;
  Rng rng(seed);
  for (Eigen::Index j = 0; j < noisy.hypothesis.w.size(); ++j)
    noisy.hypothesis.w[j] += rng.laplace(scale);
  noisy.hypothesis.b += rng.laplace(scale);
  noisy.randomized = true;
  return noisy;
}

FitResult dp_objective_perturb(const Dataset& d, const LossKind& kind, const Regularizer& reg,
                               double epsilon, const SolverConfig& cfg, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (kind.tag != LossTag::Squared && kind.tag != LossTag::Logistic)
    throw UnsupportedTrainingLossError("objective perturbation needs a smooth loss");
  bool has_l2 = false;
  for (const auto& term : reg.terms) {
    if (const auto* l2 = std::get_if<L2Term>(&term))
      if (l2->alpha > 0.0) has_l2 = true;
  }
  if (!has_l2)
    throw StrongConvexityRequiredError(
        "objective perturbation needs an L2 term for a unique minimizer");

  Rng rng(seed);
  Vector direction(d.dim());
  for (Eigen::Index j = 0; j < d.dim(); ++j) direction[j] = rng.normal();
  const double n = direction.norm();
  if (n == 0.0) direction.setConstant(1.0 / std::sqrt(static_cast<double>(d.dim())));
  else direction /= n;
  const double radius = rng.gamma(static_cast<double>(d.dim())) * (2.0 / epsilon);

  ObjectiveTilt tilt;
  tilt.coeff_w = (radius / static_cast<double>(d.size())) * direction;
  FitResult result = erm_fit(d, kind, reg, cfg, tilt);
  result.randomized = true;
  return result;
}

FitResult private_fit(const Dataset& d, const LossKind& kind, const Regularizer& reg,
                      const DPParams& params, const SolverConfig& cfg) {
  if (!(params.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (params.delta < 0.0 || params.delta >= 1.0) throw ConfigError("delta must lie in [0,1)");
  if (const auto* output = std::get_if<OutputPerturbation>(&params.mechanism))
    return dp_output_perturb(erm_fit(d, kind, reg, cfg), output->scale, params.seed);
  return dp_objective_perturb(d, kind, reg, params.epsilon, cfg, params.seed);
}

Mechanism make_laplace_mean_mechanism(double lo, double hi, double scale) {
  if (!(hi > lo)) throw ConfigError("mean query needs hi > lo");
  return [lo, hi, scale](const Dataset& d, std::uint64_t trial_seed) {
    KahanSum sum;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      sum.add(std::min(hi, std::max(lo, d.y[i])));
    double out = sum.value() / static_cast<double>(d.size());
    if (scale > 0.0) {
      Rng rng(trial_seed);
      out += rng.laplace(scale);
    }
    return out;
  };
}

namespace {

long count_differing_points(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size() || a.dim() != b.dim())
    throw NotNeighborsError("datasets differ in shape, not in a single point");
  long diffs = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    bool same = a.y[i] == b.y[i] && a.weights[i] == b.weights[i];
    if (same) same = (a.X.row(i).array() == b.X.row(i).array()).all();
    if (a.s.has_value() != b.s.has_value()) same = false;
    if (same && a.s && b.s) same = (*a.s)[i] == (*b.s)[i];
    if (!same) ++diffs;
  }
  return diffs;
}

}  // namespace

DpAuditReport dp_audit(const Mechanism& mechanism, const std::string& mechanism_name,
                       const Dataset& d, const Dataset& d_neighbor, double epsilon_claimed,
                       long trials, int bins, std::uint64_t seed) {
  if (trials < 10000) throw ConfigError("dp_audit needs at least 1e4 trials per dataset");
  if (bins < 2) throw ConfigError("dp_audit needs at least 2 bins");
  const long diffs = count_differing_points(d, d_neighbor);
  if (diffs > 1)
    throw NotNeighborsError("datasets differ in " + std::to_string(diffs) +
                            " points; neighbors differ in at most one");

  std::vector<double> out_p(static_cast<std::size_t>(trials));
  std::vector<double> out_q(static_cast<std::size_t>(trials));
  for (long t = 0; t < trials; ++t) {
    out_p[static_cast<std::size_t>(t)] =
        mechanism(d, seed + static_cast<std::uint64_t>(t));
    out_q[static_cast<std::size_t>(t)] =
        mechanism(d_neighbor, seed + 0x8000000000ULL + static_cast<std::uint64_t>(t));
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : out_p) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : out_q) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  std::vector<long> count_p(static_cast<std::size_t>(bins), 0);
  std::vector<long> count_q(static_cast<std::size_t>(bins), 0);
  const double width = hi - lo;
  auto bin_of = [&](double v) {
    if (width <= 0.0) return 0;
    int idx = static_cast<int>(std::floor((v - lo) / width * static_cast<double>(bins)));
    return std::min(bins - 1, std::max(0, idx));
  };
  for (double v : out_p) count_p[static_cast<std::size_t>(bin_of(v))] += 1;
  for (double v : out_q) count_q[static_cast<std::size_t>(bin_of(v))] += 1;

  DpAuditReport report;
  report.mechanism = mechanism_name;
  report.epsilon_claimed = epsilon_claimed;
  report.trials = trials;
  report.bins = bins;

  double max_ratio = 0.0;
  long min_count = std::numeric_limits<long>::max();
  bool disjoint = false;
  bool any_considered = false;
  for (int k = 0; k < bins; ++k) {
    const long cp = count_p[static_cast<std::size_t>(k)];
    const long cq = count_q[static_cast<std::size_t>(k)];
    if ((cp >= 10 && cq == 0) || (cq >= 10 && cp == 0)) disjoint = true;
    if (cp < 10 || cq < 10) continue;
    any_considered = true;
    min_count = std::min(min_count, std::min(cp, cq));
    const double ratio = std::fabs(std::log(static_cast<double>(cp + 1) /
                                            static_cast<double>(cq + 1)));
    max_ratio = std::max(max_ratio, ratio);
  }
  report.slack = any_considered ? 3.0 / std::sqrt(static_cast<double>(min_count))
                                : 3.0 / std::sqrt(10.0);
  report.epsilon_estimate =
      disjoint ? std::numeric_limits<double>::infinity() : max_ratio;
  report.pass = report.epsilon_estimate <= epsilon_claimed + report.slack;
  return report;
}

// ---------------------------------------------------------------------------
// Shallow decision trees
// ---------------------------------------------------------------------------

namespace {

double node_impurity(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  if (d.task == TaskKind::BinaryClassification) {
    long pos = 0;
    for (Eigen::Index i : rows)
      if (d.y[i] > 0.0) ++pos;
    const double n = static_cast<double>(rows.size());
    const double p = static_cast<double>(pos) / n;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
  }
  double mean = 0.0;
  for (Eigen::Index i : rows) mean += d.y[i];
  mean /= static_cast<double>(rows.size());
  double sse = 0.0;
  for (Eigen::Index i : rows) {
    const double dev = d.y[i] - mean;
    sse += dev * dev;
  }
  return sse / static_cast<double>(rows.size());
}

double leaf_prediction(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  if (d.task == TaskKind::BinaryClassification) {
    long pos = 0;
    for (Eigen::Index i : rows)
      if (d.y[i] > 0.0) ++pos;
    const long neg = static_cast<long>(rows.size()) - pos;
    return pos >= neg ? 1.0 : -1.0;
  }
  double mean = 0.0;
  for (Eigen::Index i : rows) mean += d.y[i];
  return mean / static_cast<double>(rows.size());
}

struct SplitChoice {
  bool found = false;
  Eigen::Index feature = 0;
  double threshold = 0.0;
  std::vector<Eigen::Index> left;
  std::vector<Eigen::Index> right;
};

SplitChoice best_split(const Dataset& d, const std::vector<Eigen::Index>& rows, long min_leaf) {
  SplitChoice best;
  double best_impurity = node_impurity(d, rows);
  const double n = static_cast<double>(rows.size());
  if (best_impurity <= 0.0) return best;

  for (Eigen::Index j = 0; j < d.dim(); ++j) {
    std::vector<double> values;
    values.reserve(rows.size());
    for (Eigen::Index i : rows) values.push_back(d.X(i, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double threshold = 0.5 * (values[v] + values[v + 1]);
      std::vector<Eigen::Index> left;
      std::vector<Eigen::Index> right;
      for (Eigen::Index i : rows) {
        (d.X(i, j) <= threshold ? left : right).push_back(i);
      }
      if (static_cast<long>(left.size()) < min_leaf ||
          static_cast<long>(right.size()) < min_leaf)
        continue;
      const double weighted =
          (static_cast<double>(left.size()) * node_impurity(d, left) +
           static_cast<double>(right.size()) * node_impurity(d, right)) /
          n;
      // Strict improvement; scanning in (feature, threshold) order realizes
      // the lowest-index / smallest-threshold tie-break.
      if (weighted < best_impurity - 1e-12) {
        best_impurity = weighted;
        best.found = true;
        best.feature = j;
        best.threshold = threshold;
        best.left = std::move(left);
        best.right = std::move(right);
      }
    }
  }
  return best;
}

int build_node(TreeHypothesis& tree, const Dataset& d, const std::vector<Eigen::Index>& rows,
               int depth, int max_depth, long min_leaf) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (depth < max_depth && static_cast<long>(rows.size()) >= 2 * min_leaf) {
    SplitChoice split = best_split(d, rows, min_leaf);
    if (split.found) {
      tree.nodes[static_cast<std::size_t>(index)].feature = static_cast<int>(split.feature);
      tree.nodes[static_cast<std::size_t>(index)].threshold = split.threshold;
      const int left = build_node(tree, d, split.left, depth + 1, max_depth, min_leaf);
      const int right = build_node(tree, d, split.right, depth + 1, max_depth, min_leaf);
      tree.nodes[static_cast<std::size_t>(index)].left = left;
      tree.nodes[static_cast<std::size_t>(index)].right = right;
      return index;
    }
  }
  TreeNode& leaf = tree.nodes[static_cast<std::size_t>(index)];
  leaf.feature = -1;
  leaf.prediction = leaf_prediction(d, rows);
  leaf.support = static_cast<long>(rows.size());
  return index;
}

}  // namespace

TreeHypothesis fit_tree(const Dataset& d, int max_depth, long min_leaf) {
  if (d.size() < 1) throw EmptyDatasetError("fit_tree: empty dataset");
  if (max_depth < 1 || min_leaf < 1) throw ConfigError("max_depth and min_leaf must be >= 1");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) rows[static_cast<std::size_t>(i)] = i;
  TreeHypothesis tree;
  build_node(tree, d, rows, 0, max_depth, min_leaf);
  return tree;
}

void recount_support(TreeHypothesis& tree, const Dataset& d) {
  if (tree.empty()) throw EmptyDatasetError("recount_support: empty tree");
  for (auto& node : tree.nodes)
    if (node.feature < 0) node.support = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    int idx = 0;
    for (;;) {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
      if (node.feature < 0) {
        node.support += 1;
        break;
      }
      idx = d.X(i, node.feature) <= node.threshold ? node.left : node.right;
    }
  }
}

namespace {

void collect_flagged(const TreeHypothesis& tree, int idx, std::vector<FeatureInterval>& box,
                     long k, std::vector<FlaggedLeaf>& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
  if (node.feature < 0) {
    if (node.support < k) out.push_back(FlaggedLeaf{idx, node.support, box});
    return;
  }
  const auto f = static_cast<std::size_t>(node.feature);
  const FeatureInterval saved = box[f];
  box[f].hi = std::min(box[f].hi, node.threshold);
  collect_flagged(tree, node.left, box, k, out);
  box[f] = saved;
  box[f].lo = std::max(box[f].lo, node.threshold);
  collect_flagged(tree, node.right, box, k, out);
  box[f] = saved;
}

}  // namespace

std::vector<FlaggedLeaf> audit_tree_regions(const TreeHypothesis& tree, const Dataset& d,
                                            long k) {
  if (tree.empty()) throw EmptyDatasetError("audit_tree_regions: empty tree");
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<FeatureInterval> box(
      static_cast<std::size_t>(d.dim()),
      FeatureInterval{-std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()});
  std::vector<FlaggedLeaf> flagged;
  collect_flagged(tree, 0, box, k, flagged);
  return flagged;
}

}  // namespace trusterm
