#ifndef TRUSTERM_DATA_HPP
#define TRUSTERM_DATA_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trusterm/core.hpp"

namespace trusterm {

// Column-role mapping for CSV ingestion. Every column not named here is a
// feature, in header order.
struct CsvSchema {
  std::string label;
  std::optional<std::string> sensitive;
  std::optional<std::string> weight;
};

// Malicious noise model: each point stays clean with probability p_clean,
// otherwise it is replaced by the adversary's output.
struct ContaminationSpec {
  double p_clean = 1.0;
  std::function<DataPoint(std::uint64_t seed, Eigen::Index index, const Dataset&)> adversary;
  std::uint64_t seed = 0;
};

// Adversary used when ContaminationSpec::adversary is empty: a fixed extreme
// point at (mean + 10 stddev per coordinate, label -10 max|y|).
DataPoint default_adversary(std::uint64_t seed, Eigen::Index index, const Dataset& d);

struct FeatureSummary {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct DatasheetReport {
  long row_count = 0;
  long column_count = 0;
  std::vector<FeatureSummary> features;
  FeatureSummary label;
  std::vector<std::pair<std::string, long>> group_counts;
  long missing_values = 0;  // always 0 after ingestion
  std::string provenance;
  std::string created_at;  // ISO-8601 UTC
};

Dataset load_csv(const std::string& path, const CsvSchema& schema,
                 TaskKind task = TaskKind::Regression);

// Seed-deterministic disjoint partition with round(fraction*m) training rows,
// at least one row on each side.
std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed);

DatasheetReport datasheet(const Dataset& d);

// Replaces each point by 2d copies at x +- sqrt(alpha) e_j, weight w/(2d).
// For squared loss this shifts every risk value by exactly (alpha/d)||w||^2.
Dataset augment_noise(const Dataset& d, double alpha);

struct ContaminationResult {
  Dataset data;
  std::vector<bool> clean_mask;
};

ContaminationResult contaminate(const Dataset& d, const ContaminationSpec& spec);

struct PruneResult {
  Dataset data;
  std::vector<Eigen::Index> removed;
};

// Scores residuals against a least-absolute-deviations pre-fit with the
// modified z-score and drops points above the threshold (default 3.5).
PruneResult prune_outliers(const Dataset& d, double threshold);

// Appends one copy of every point with the binary feature at `index` toggled.
Dataset counterfactual_flip(const Dataset& d, Eigen::Index index);

// Appends pseudo-labeled points (x, u(x)) with weight lambda each.
Dataset pseudo_label_merge(const Dataset& d, const Matrix& test_features,
                           const Vector& user_labels, double lambda);

}  // namespace trusterm

#endif  // TRUSTERM_DATA_HPP
