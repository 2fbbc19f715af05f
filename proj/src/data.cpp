#include "trusterm/data.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "trusterm/rng.hpp"
#include "trusterm/solver.hpp"

namespace trusterm {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value))
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + cell + "' as a finite number");
  return value;
}

FeatureSummary summarize(const std::string& name, const Vector& v) {
  FeatureSummary s;
  s.name = name;
  s.min = v.minCoeff();
  s.max = v.maxCoeff();
  KahanSum sum;
  for (Eigen::Index i = 0; i < v.size(); ++i) sum.add(v[i]);
  s.mean = sum.value() / static_cast<double>(v.size());
  KahanSum sq;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double dev = v[i] - s.mean;
    sq.add(dev * dev);
  }
  s.stddev = std::sqrt(sq.value() / static_cast<double>(v.size()));
  return s;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

Dataset take_rows(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), d.dim());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.weights.resize(static_cast<Eigen::Index>(rows.size()));
  if (d.s) out.s = Eigen::VectorXi(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Eigen::Index i = rows[k];
    out.X.row(static_cast<Eigen::Index>(k)) = d.X.row(i);
    out.y[static_cast<Eigen::Index>(k)] = d.y[i];
    out.weights[static_cast<Eigen::Index>(k)] = d.weights[i];
    if (d.s) (*out.s)[static_cast<Eigen::Index>(k)] = (*d.s)[i];
  }
  out.feature_names = d.feature_names;
  out.group_names = d.group_names;
  out.task = d.task;
  out.provenance = d.provenance;
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema, TaskKind task) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw EmptyDatasetError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);

  auto find_column = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const std::ptrdiff_t label_col = find_column(schema.label);
  if (label_col < 0) throw SchemaError("label column '" + schema.label + "' not found");
  std::ptrdiff_t sensitive_col = -1;
  if (schema.sensitive) {
    sensitive_col = find_column(*schema.sensitive);
    if (sensitive_col < 0)
      throw SchemaError("sensitive column '" + *schema.sensitive + "' not found");
  }
  std::ptrdiff_t weight_col = -1;
  if (schema.weight) {
    weight_col = find_column(*schema.weight);
    if (weight_col < 0) throw SchemaError("weight column '" + *schema.weight + "' not found");
  }

  std::vector<std::ptrdiff_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto idx = static_cast<std::ptrdiff_t>(c);
    if (idx == label_col || idx == sensitive_col || idx == weight_col) continue;
    feature_cols.push_back(idx);
    feature_names.push_back(header[c]);
  }
  if (feature_cols.empty()) throw SchemaError("no feature columns left after role assignment");

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::vector<double> weights;
  std::vector<std::string> sensitive_raw;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row_number) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    std::vector<double> features;
    features.reserve(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      features.push_back(
          parse_number(cells[static_cast<std::size_t>(feature_cols[k])], row_number,
                       feature_names[k]));
    labels.push_back(
        parse_number(cells[static_cast<std::size_t>(label_col)], row_number, schema.label));
    if (weight_col >= 0) {
      const double w = parse_number(cells[static_cast<std::size_t>(weight_col)], row_number,
                                    *schema.weight);
      if (w <= 0.0)
        throw ParseError("row " + std::to_string(row_number) + ": weight must be positive");
      weights.push_back(w);
    }
    if (sensitive_col >= 0)
      sensitive_raw.push_back(cells[static_cast<std::size_t>(sensitive_col)]);
    rows.push_back(std::move(features));
  }
  if (rows.empty()) throw EmptyDatasetError("'" + path + "' has a header but no data rows");

  Dataset d;
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto dim = static_cast<Eigen::Index>(feature_cols.size());
  d.X.resize(m, dim);
  d.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j)
      d.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    d.y[i] = labels[static_cast<std::size_t>(i)];
  }
  d.weights = weight_col >= 0 ? Eigen::Map<Vector>(weights.data(), m).eval() : Vector::Ones(m);
  if (sensitive_col >= 0) {
    // Codes by lexicographic rank of the group name, independent of row order.
    std::map<std::string, int> codes;
    for (const auto& g : sensitive_raw) codes.emplace(g, 0);
    int next = 0;
    for (auto& [name, code] : codes) {
      code = next++;
      d.group_names.push_back(name);
    }
    d.s = Eigen::VectorXi(m);
    for (Eigen::Index i = 0; i < m; ++i)
      (*d.s)[i] = codes[sensitive_raw[static_cast<std::size_t>(i)]];
  }
  d.feature_names = std::move(feature_names);
  d.task = task;
  d.provenance = "loaded from " + path;
  validate_dataset(d, /*allow_zero_weights=*/false);
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (d.size() < 2) throw EmptyDatasetError("split needs at least two rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0,1)");
  const Eigen::Index m = d.size();
  auto train_size = static_cast<Eigen::Index>(
      std::llround(train_fraction * static_cast<double>(m)));
  train_size = std::max<Eigen::Index>(1, std::min(m - 1, train_size));

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<Eigen::Index> train_rows(perm.begin(), perm.begin() + train_size);
  std::vector<Eigen::Index> val_rows(perm.begin() + train_size, perm.end());
  return {take_rows(d, train_rows), take_rows(d, val_rows)};
}

DatasheetReport datasheet(const Dataset& d) {
  validate_dataset(d);
  DatasheetReport report;
  report.row_count = d.size();
  report.column_count = d.dim();
  for (Eigen::Index j = 0; j < d.dim(); ++j) {
    const std::string name = static_cast<std::size_t>(j) < d.feature_names.size()
                                 ? d.feature_names[static_cast<std::size_t>(j)]
                                 : "f" + std::to_string(j);
    report.features.push_back(summarize(name, d.X.col(j)));
  }
  report.label = summarize("label", d.y);
  if (d.s) {
    std::vector<long> counts(d.group_names.size(), 0);
    for (Eigen::Index i = 0; i < d.size(); ++i) counts[static_cast<std::size_t>((*d.s)[i])] += 1;
    for (std::size_t g = 0; g < d.group_names.size(); ++g)
      report.group_counts.emplace_back(d.group_names[g], counts[g]);
  }
  report.missing_values = 0;
  report.provenance = d.provenance;
  report.created_at = utc_timestamp();
  return report;
}

Dataset augment_noise(const Dataset& d, double alpha) {
  if (alpha < 0.0) throw ConfigError("alpha must be nonnegative");
  const Eigen::Index m = d.size();
  const Eigen::Index dim = d.dim();
  const double shift = std::sqrt(alpha);
  const double copies = 2.0 * static_cast<double>(dim);

  Dataset out;
  out.X.resize(m * 2 * dim, dim);
  out.y.resize(m * 2 * dim);
  out.weights.resize(m * 2 * dim);
  if (d.s) out.s = Eigen::VectorXi(m * 2 * dim);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w = d.weights[i] / copies;
    for (Eigen::Index j = 0; j < dim; ++j) {
      for (const double sign : {+1.0, -1.0}) {
        out.X.row(r) = d.X.row(i);
        out.X(r, j) += sign * shift;
        out.y[r] = d.y[i];
        out.weights[r] = w;
        if (d.s) (*out.s)[r] = (*d.s)[i];
        ++r;
      }
    }
  }
  out.feature_names = d.feature_names;
  out.group_names = d.group_names;
  out.task = d.task;
  out.provenance = d.provenance;
  return out;
}

DataPoint default_adversary(std::uint64_t /*seed*/, Eigen::Index /*index*/, const Dataset& d) {
  DataPoint p;
  p.features.resize(d.dim());
  for (Eigen::Index j = 0; j < d.dim(); ++j) {
    const FeatureSummary s = summarize("", d.X.col(j));
    p.features[j] = s.mean + 10.0 * s.stddev;
  }
  p.label = -10.0 * d.y.cwiseAbs().maxCoeff();
  p.weight = 1.0;
  return p;
}

ContaminationResult contaminate(const Dataset& d, const ContaminationSpec& spec) {
  if (!(spec.p_clean >= 0.0 && spec.p_clean <= 1.0))
    throw ConfigError("p_clean must lie in [0,1]");
  const auto adversary = spec.adversary ? spec.adversary : default_adversary;
  ContaminationResult result;
  result.data = d;
  result.clean_mask.assign(static_cast<std::size_t>(d.size()), true);
  Rng rng(spec.seed);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const bool keep = rng.uniform01() < spec.p_clean;
    if (keep) continue;
    const DataPoint p = adversary(spec.seed, i, d);
    if (p.features.size() != d.dim())
      throw DimensionError("adversary produced a point of wrong dimension");
    result.data.X.row(i) = p.features.transpose();
    result.data.y[i] = p.label;
    result.data.weights[i] = p.weight;
    if (result.data.s) (*result.data.s)[i] = p.sensitive.value_or((*d.s)[i]);
    result.clean_mask[static_cast<std::size_t>(i)] = false;
  }
  return result;
}

PruneResult prune_outliers(const Dataset& d, double threshold) {
  if (d.size() < 3) throw EmptyDatasetError("prune_outliers needs at least three rows");
  if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");

  // Robust pre-fit so the outlier cannot mask its own residual.
  SolverConfig cfg;
  cfg.max_iter = 6000;
  cfg.step_scale = 0.1;
  cfg.tol = 1e-12;
  const FitResult lad = erm_fit(d, LossKind::absolute(), Regularizer{}, cfg);

  Vector residuals(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    residuals[i] = d.y[i] - (lad.hypothesis.w.dot(d.X.row(i).transpose()) + lad.hypothesis.b);

  std::vector<double> sorted(residuals.data(), residuals.data() + residuals.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median =
      m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  std::vector<double> devs(m);
  for (std::size_t i = 0; i < m; ++i)
    devs[i] = std::fabs(residuals[static_cast<Eigen::Index>(i)] - median);
  std::vector<double> devs_sorted = devs;
  std::sort(devs_sorted.begin(), devs_sorted.end());
  const double mad =
      m % 2 == 1 ? devs_sorted[m / 2] : 0.5 * (devs_sorted[m / 2 - 1] + devs_sorted[m / 2]);

  std::vector<Eigen::Index> keep;
  PruneResult result;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double score;
    if (mad > 0.0) {
      score = 0.6745 * devs[static_cast<std::size_t>(i)] / mad;
    } else {
      // Degenerate spread: any deviation from the median is infinitely many
      // MADs away.
      score = devs[static_cast<std::size_t>(i)] > 0.0
                  ? std::numeric_limits<double>::infinity()
                  : 0.0;
    }
    if (score > threshold) {
      result.removed.push_back(i);
    } else {
      keep.push_back(i);
    }
  }
  if (keep.empty()) throw DegenerateDatasetError("outlier pruning removed every point");
  result.data = take_rows(d, keep);
  return result;
}

Dataset counterfactual_flip(const Dataset& d, Eigen::Index index) {
  if (index < 0 || index >= d.dim()) throw RangeError("flip index out of range");
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = d.X(i, index);
    if (v != 0.0 && v != 1.0)
      throw NotBinaryError("feature " + std::to_string(index) + " is not {0,1}-valued at row " +
                           std::to_string(i));
  }
  const Eigen::Index m = d.size();
  Dataset out;
  out.X.resize(2 * m, d.dim());
  out.y.resize(2 * m);
  out.weights.resize(2 * m);
  if (d.s) out.s = Eigen::VectorXi(2 * m);
  out.X.topRows(m) = d.X;
  out.y.head(m) = d.y;
  out.weights.head(m) = d.weights;
  if (d.s) out.s->head(m) = *d.s;
  for (Eigen::Index i = 0; i < m; ++i) {
    out.X.row(m + i) = d.X.row(i);
    out.X(m + i, index) = 1.0 - d.X(i, index);
    out.y[m + i] = d.y[i];
    out.weights[m + i] = d.weights[i];
    if (d.s) (*out.s)[m + i] = (*d.s)[i];
  }
  out.feature_names = d.feature_names;
  out.group_names = d.group_names;
  out.task = d.task;
  out.provenance = d.provenance;
  return out;
}

Dataset pseudo_label_merge(const Dataset& d, const Matrix& test_features,
                           const Vector& user_labels, double lambda) {
  if (test_features.rows() != user_labels.size())
    throw DimensionError("pseudo feature rows do not match user label count");
  if (test_features.cols() != d.dim())
    throw DimensionError("pseudo feature dimension does not match dataset");
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");

  const Eigen::Index m = d.size();
  const Eigen::Index k = test_features.rows();
  Dataset out;
  out.X.resize(m + k, d.dim());
  out.y.resize(m + k);
  out.weights.resize(m + k);
  out.X.topRows(m) = d.X;
  out.X.bottomRows(k) = test_features;
  out.y.head(m) = d.y;
  out.y.tail(k) = user_labels;
  out.weights.head(m) = d.weights;
  out.weights.tail(k).setConstant(lambda);
  if (d.s) {
    // Pseudo points carry a dedicated group so group sizes stay meaningful.
    out.group_names = d.group_names;
    out.group_names.push_back("_pseudo");
    out.s = Eigen::VectorXi(m + k);
    out.s->head(m) = *d.s;
    out.s->tail(k).setConstant(static_cast<int>(d.group_names.size()));
  }
  out.feature_names = d.feature_names;
  out.task = d.task;
  out.provenance = d.provenance;
  return out;
}

}  // namespace trusterm
