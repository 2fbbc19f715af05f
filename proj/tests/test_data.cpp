#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "test_util.hpp"
#include "trusterm/data.hpp"
#include "trusterm/solver.hpp"

using namespace trusterm;

namespace {

std::filesystem::path write_temp_csv(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

std::multiset<std::string> row_multiset(const Dataset& d) {
  std::multiset<std::string> rows;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    std::string key;
    for (Eigen::Index j = 0; j < d.dim(); ++j) key += std::to_string(d.X(i, j)) + "|";
    key += std::to_string(d.y[i]) + "|" + std::to_string(d.weights[i]);
    rows.insert(key);
  }
  return rows;
}

}  // namespace

TEST_CASE("load_csv parses roles and rejects malformed cells") {
  const auto path = write_temp_csv("trusterm_ok.csv",
                                   "f1,f2,label\n"
                                   "1.0,2.0,3.0\n"
                                   "4.0,5.0,6.0\n");
  const Dataset d = load_csv(path.string(), CsvSchema{"label", {}, {}});
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.feature_names == std::vector<std::string>{"f1", "f2"});
  CHECK(d.y[1] == 6.0);

  CHECK_THROWS_AS(load_csv(path.string(), CsvSchema{"label", std::string("group"), {}}),
                  SchemaError);
  CHECK_THROWS_AS(load_csv(path.string(), CsvSchema{"missing", {}, {}}), SchemaError);

  const auto bad = write_temp_csv("trusterm_nan.csv",
                                  "f1,label\n"
                                  "NaN,1.0\n");
  CHECK_THROWS_AS(load_csv(bad.string(), CsvSchema{"label", {}, {}}), ParseError);

  const auto empty = write_temp_csv("trusterm_empty.csv", "f1,label\n");
  CHECK_THROWS_AS(load_csv(empty.string(), CsvSchema{"label", {}, {}}), EmptyDatasetError);
}

TEST_CASE("load_csv reads sensitive and weight columns") {
  const auto path = write_temp_csv("trusterm_roles.csv",
                                   "f1,g,label,w\n"
                                   "1.0,B,2.0,1.5\n"
                                   "2.0,A,3.0,0.5\n"
                                   "3.0,B,4.0,1.0\n");
  const Dataset d =
      load_csv(path.string(), CsvSchema{"label", std::string("g"), std::string("w")});
  CHECK(d.dim() == 1);
  REQUIRE(d.s.has_value());
  CHECK(d.group_names == std::vector<std::string>{"A", "B"});
  CHECK((*d.s)[0] == 1);  // codes by lexicographic rank, not row order
  CHECK((*d.s)[1] == 0);
  CHECK(d.weights[0] == 1.5);
}

TEST_CASE("split partitions deterministically") {
  const auto d = testutil::random_regression(10, 2, 42);
  const auto [train, val] = split(d, 0.8, 123);
  CHECK(train.size() == 8);
  CHECK(val.size() == 2);

  const auto [train2, val2] = split(d, 0.8, 123);
  CHECK(train.X == train2.X);
  CHECK(val.y == val2.y);

  auto whole = row_multiset(d);
  auto parts = row_multiset(train);
  for (const auto& r : row_multiset(val)) parts.insert(r);
  CHECK(parts == whole);

  Dataset tiny;
  tiny.X.resize(1, 1);
  tiny.X << 1.0;
  tiny.y.resize(1);
  tiny.y << 1.0;
  tiny.weights = Vector::Ones(1);
  CHECK_THROWS_AS(split(tiny, 0.5, 0), EmptyDatasetError);
}

TEST_CASE("datasheet statistics") {
  Matrix x = Matrix::Zero(4, 2);
  Vector y = Vector::Zero(4);
  auto d = testutil::make_dataset(x, y);
  d.feature_names = {"a", "b"};
  const auto sheet = datasheet(d);
  CHECK(sheet.row_count == 4);
  CHECK(sheet.features[0].mean == 0.0);
  CHECK(sheet.features[0].stddev == 0.0);
  CHECK(sheet.missing_values == 0);

  auto grouped = testutil::random_regression(4, 2, 5);
  grouped.s = Eigen::VectorXi(4);
  *grouped.s << 0, 0, 0, 1;
  grouped.group_names = {"A", "B"};
  const auto sheet2 = datasheet(grouped);
  REQUIRE(sheet2.group_counts.size() == 2);
  CHECK(sheet2.group_counts[0] == std::pair<std::string, long>{"A", 3});
  CHECK(sheet2.group_counts[1] == std::pair<std::string, long>{"B", 1});

  const auto wide = testutil::random_regression(101, 3, 9);
  const auto sheet3 = datasheet(wide);
  CHECK(sheet3.features[0].mean ==
        doctest::Approx(oracles::two_pass_mean(wide.X.col(0))).epsilon(1e-12));
}

TEST_CASE("augment_noise copies straddle each coordinate") {
  Matrix x(1, 1);
  x << 2.0;
  Vector y(1);
  y << 7.0;
  const auto d = testutil::make_dataset(x, y);

  const Dataset same = augment_noise(d, 0.0);
  CHECK(same.size() == 2);
  CHECK(same.X(0, 0) == 2.0);
  CHECK(same.X(1, 0) == 2.0);

  const Dataset shifted = augment_noise(d, 0.25);
  CHECK(shifted.X(0, 0) == doctest::Approx(2.5));
  CHECK(shifted.X(1, 0) == doctest::Approx(1.5));
  CHECK(shifted.y[0] == 7.0);
}

TEST_CASE("augmentation equals the squared-norm penalty exactly") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.below(4));
    const auto d = testutil::random_regression(5 + static_cast<Eigen::Index>(rng.below(20)),
                                               dim, seed + 100);
    const auto h = testutil::random_hypothesis(dim, seed + 200);
    const double alpha = rng.uniform(0.0, 2.0);
    const Dataset aug = augment_noise(d, alpha);
    const double lhs = empirical_risk(aug, h, LossKind::squared());
    const double rhs = empirical_risk(d, h, LossKind::squared()) +
                       (alpha / static_cast<double>(dim)) * h.w.squaredNorm();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("augment_noise preserves total weight") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto d = testutil::random_regression(13, 3, seed);
    Rng rng(seed + 5);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.weights[i] = rng.uniform(0.1, 3.0);
    const Dataset aug = augment_noise(d, 0.7);
    CHECK(aug.total_weight() == doctest::Approx(d.total_weight()).epsilon(1e-12));
  }
}

TEST_CASE("contaminate keeps or replaces points per the Bernoulli draw") {
  const auto d = testutil::random_regression(20, 2, 3);

  ContaminationSpec keep_all;
  keep_all.p_clean = 1.0;
  keep_all.seed = 9;
  const auto clean = contaminate(d, keep_all);
  CHECK(clean.data.X == d.X);
  CHECK(std::all_of(clean.clean_mask.begin(), clean.clean_mask.end(), [](bool b) { return b; }));

  ContaminationSpec replace_all;
  replace_all.p_clean = 0.0;
  replace_all.seed = 9;
  const auto dirty = contaminate(d, replace_all);
  CHECK(std::none_of(dirty.clean_mask.begin(), dirty.clean_mask.end(), [](bool b) { return b; }));
  CHECK(dirty.data.y[0] == doctest::Approx(-10.0 * d.y.cwiseAbs().maxCoeff()));

  // Same seed, same output, bit for bit.
  const auto dirty2 = contaminate(d, replace_all);
  CHECK(dirty.data.X == dirty2.data.X);
}

TEST_CASE("contaminate clean count concentrates around p_clean * m") {
  const auto d = testutil::random_regression(10000, 1, 77);
  ContaminationSpec spec;
  spec.p_clean = 0.75;
  spec.seed = 2024;
  const auto result = contaminate(d, spec);
  const double clean = static_cast<double>(
      std::count(result.clean_mask.begin(), result.clean_mask.end(), true));
  const double sigma = std::sqrt(10000.0 * 0.75 * 0.25);
  CHECK(std::fabs(clean - 7500.0) <= 3.0 * sigma);
}

TEST_CASE("prune_outliers drops the dominant-residual point of the toy set") {
  // Five collinear points plus one outlier at (6, 10).
  Matrix x(6, 1);
  x << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Vector y(6);
  y << 1.5, 2.5, 3.5, 4.5, 5.5, 10.0;
  const auto d = testutil::make_dataset(x, y);

  const auto pruned = prune_outliers(d, 3.5);
  REQUIRE(pruned.removed.size() == 1);
  CHECK(pruned.removed[0] == 5);
  CHECK(pruned.data.size() == 5);

  // Perfectly collinear data: nothing to remove.
  Vector y_line(6);
  y_line << 1.5, 2.5, 3.5, 4.5, 5.5, 6.5;
  const auto collinear = testutil::make_dataset(x, y_line);
  CHECK(prune_outliers(collinear, 3.5).removed.empty());

  // Unbounded threshold: nothing to remove.
  CHECK(prune_outliers(d, std::numeric_limits<double>::infinity()).removed.empty());
}

TEST_CASE("counterfactual_flip toggles the binary column") {
  Matrix x(3, 2);
  x << 0.0, 1.5, 1.0, -0.5, 0.0, 2.5;
  Vector y(3);
  y << 1.0, 2.0, 3.0;
  const auto d = testutil::make_dataset(x, y);

  const Dataset flipped = counterfactual_flip(d, 0);
  CHECK(flipped.size() == 6);
  CHECK(flipped.X(3, 0) == 1.0);
  CHECK(flipped.X(3, 1) == 1.5);
  CHECK(flipped.y[3] == 1.0);

  // Flipping the appended block reproduces the originals.
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(flipped.X(3 + i, 0) == 1.0 - d.X(i, 0));
    CHECK(flipped.X(3 + i, 1) == d.X(i, 1));
  }

  // The flip column becomes exactly balanced.
  long ones = 0;
  for (Eigen::Index i = 0; i < flipped.size(); ++i)
    if (flipped.X(i, 0) == 1.0) ++ones;
  CHECK(ones == 3);

  Matrix bad = x;
  bad(1, 0) = 0.5;
  CHECK_THROWS_AS(counterfactual_flip(testutil::make_dataset(bad, y), 0), NotBinaryError);
}

TEST_CASE("pseudo_label_merge appends lambda-weighted points") {
  const auto d = testutil::random_regression(6, 2, 21);
  Matrix probes(2, 2);
  probes << 0.5, -0.5, 1.5, 0.25;
  Vector labels(2);
  labels << 3.0, -1.0;

  const auto h = testutil::random_hypothesis(2, 4);

  // lambda = 0: merged risk equals original risk for every h.
  const Dataset zero = pseudo_label_merge(d, probes, labels, 0.0);
  CHECK(empirical_risk(zero, h, LossKind::squared()) ==
        doctest::Approx(empirical_risk(d, h, LossKind::squared())).epsilon(1e-12));

  // One pseudo point at lambda = 1 with unit weights: plain mean over m+1.
  const Dataset one = pseudo_label_merge(d, probes.topRows(1), labels.head(1), 1.0);
  double losses = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    losses += eval_loss(LossKind::squared(), d.y[i], predict(h, d.X.row(i).transpose()));
  losses += eval_loss(LossKind::squared(), labels[0], predict(h, probes.row(0).transpose()));
  CHECK(empirical_risk(one, h, LossKind::squared()) ==
        doctest::Approx(losses / 7.0).epsilon(1e-12));

  CHECK_THROWS_AS(pseudo_label_merge(d, probes, labels.head(1), 1.0), DimensionError);
}

TEST_CASE("pseudo merge satisfies the weighted-loss identity") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const auto d = testutil::random_regression(8, 2, seed + 400);
    const auto h = testutil::random_hypothesis(2, seed + 500);
    const double lambda = rng.uniform(0.0, 3.0);
    Matrix probes(3, 2);
    Vector labels(3);
    for (int i = 0; i < 3; ++i) {
      probes(i, 0) = rng.normal();
      probes(i, 1) = rng.normal();
      labels[i] = rng.normal();
    }
    const Dataset merged = pseudo_label_merge(d, probes, labels, lambda);
    const double merged_total = merged.total_weight();
    const double original_total = d.total_weight();
    const double lhs = empirical_risk(merged, h, LossKind::squared()) * merged_total -
                       empirical_risk(d, h, LossKind::squared()) * original_total;
    double pseudo_losses = 0.0;
    for (int i = 0; i < 3; ++i)
      pseudo_losses += eval_loss(LossKind::squared(), labels[i],
                                 predict(h, probes.row(i).transpose()));
    CHECK(lhs == doctest::Approx(lambda * pseudo_losses).epsilon(1e-12));
  }
}
