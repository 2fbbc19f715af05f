// trusterm: train linear ERM models and audit them for robustness, privacy,
// fairness, and explainability. Every command is a pure function of its
// inputs and --seed; reruns produce byte-identical files.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "trusterm/data.hpp"
#include "trusterm/explainability.hpp"
#include "trusterm/fairness.hpp"
#include "trusterm/privacy.hpp"
#include "trusterm/report_json.hpp"
#include "trusterm/robustness.hpp"
#include "trusterm/solver.hpp"

namespace {

using namespace trusterm;

constexpr int kExitOk = 0;
constexpr int kExitAuditFlag = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
  std::string data_path;
  std::string schema_text;
  std::string task_text = "regression";
  std::string loss_text = "squared";
  std::string reg_text;
  double alpha = 0.0;
  double eta = 0.1;
  double epsilon = 1.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string suite;
  double baseline = 0.0;
  bool baseline_set = false;

  double train_fraction = 0.8;
  long max_iter = 5000;
  double step_scale = 0.1;
  double tol = 1e-8;
  std::string model_path;
  std::string model_params_path;
  std::string oracle_path;
  std::string pseudo_path;
  double pseudo_weight = 1.0;
  long trials = 20000;
  int bins = 20;
  double noise_scale = -1.0;  // <0: derive from sensitivity/epsilon
  double threshold = -1.0;    // <0: suite default
  int directions = 1024;
  long region_k = 2;
  bool parallel = false;
};

CsvSchema parse_schema(const std::string& text) {
  CsvSchema schema;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("schema entries must look like role=column, got '" + item + "'");
    const std::string role = item.substr(0, eq);
    const std::string column = item.substr(eq + 1);
    if (role == "label") {
      schema.label = column;
    } else if (role == "sensitive") {
      schema.sensitive = column;
    } else if (role == "weight") {
      schema.weight = column;
    } else {
      throw ConfigError("unknown schema role '" + role + "'");
    }
  }
  if (schema.label.empty()) throw ConfigError("schema must declare label=<column>");
  return schema;
}

TaskKind parse_task(const std::string& text) {
  if (text == "regression") return TaskKind::Regression;
  if (text == "classification") return TaskKind::BinaryClassification;
  throw ConfigError("task must be regression or classification");
}

LossKind parse_loss(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  if (name == "squared") return LossKind::squared();
  if (name == "absolute") return LossKind::absolute();
  if (name == "logistic") return LossKind::logistic();
  if (name == "zeroone") return LossKind::zero_one();
  if (name == "huber") {
    double delta = 1.0;
    if (colon != std::string::npos) delta = std::stod(text.substr(colon + 1));
    return LossKind::huber(delta);
  }
  throw ConfigError("unknown loss '" + text + "'");
}

Regularizer parse_regularizer(const CommonOptions& opt) {
  Regularizer reg;
  if (!opt.reg_text.empty() && opt.reg_text != "none") {
    std::stringstream ss(opt.reg_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      const std::string name = item.substr(0, colon);
      const double value =
          colon == std::string::npos ? opt.alpha : std::stod(item.substr(colon + 1));
      if (name == "l1") {
        reg.l1(value);
      } else if (name == "l2") {
        reg.l2(value);
      } else if (name == "ball1") {
        reg.norm_ball(value, 1);
      } else if (name == "ball2") {
        reg.norm_ball(value, 2);
      } else if (name == "fair") {
        reg.fairness_gap(value);
      } else {
        throw ConfigError("unknown regularizer term '" + name + "'");
      }
    }
  }
  if (!opt.pseudo_path.empty()) {
    const Dataset pseudo = load_csv(opt.pseudo_path, parse_schema(opt.schema_text),
                                    parse_task(opt.task_text));
    reg.simulatability(opt.pseudo_weight, pseudo.X, pseudo.y);
  }
  reg.validate();
  return reg;
}

std::string config_digest(const CommonOptions& opt) {
  std::string canon = opt.data_path + "|" + opt.schema_text + "|" + opt.task_text + "|" +
                      opt.loss_text + "|" + opt.reg_text + "|" + format_double(opt.alpha) +
                      "|" + format_double(opt.train_fraction) + "|" +
                      std::to_string(opt.seed) + "|" + std::to_string(opt.max_iter) + "|" +
                      format_double(opt.step_scale) + "|" + format_double(opt.tol);
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : canon) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

SolverConfig solver_config(const CommonOptions& opt) {
  SolverConfig cfg;
  cfg.max_iter = opt.max_iter;
  cfg.step_scale = opt.step_scale;
  cfg.tol = opt.tol;
  cfg.seed = opt.seed;
  return cfg;
}

std::filesystem::path out_file(const CommonOptions& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  return std::filesystem::path(opt.out_dir) / name;
}

int cmd_train(const CommonOptions& opt) {
  const Dataset full = load_csv(opt.data_path, parse_schema(opt.schema_text),
                                parse_task(opt.task_text));
  const auto [train, validation] = split(full, opt.train_fraction, opt.seed);
  const LossKind loss = parse_loss(opt.loss_text);
  if (loss.tag == LossTag::ZeroOne)
    throw ConfigError("the zero-one loss cannot be trained; choose a surrogate");
  const Regularizer reg = parse_regularizer(opt);

  const FitResult fit = erm_fit(train, loss, reg, solver_config(opt));
  const double train_risk = empirical_risk(train, fit.hypothesis, loss);
  const double validation_risk = empirical_risk(validation, fit.hypothesis, loss);

  JsonValue::Object model{{"configDigest", config_digest(opt)},
                          {"model", to_json(fit.hypothesis, train.feature_names)}};
  write_file_atomic(out_file(opt, "model.json").string(), JsonValue(model).dump(2));

  JsonValue::Object metrics{{"bestObjective", fit.best_objective},
                            {"converged", fit.converged},
                            {"iterations", fit.iterations},
                            {"trainRisk", train_risk},
                            {"validationRisk", validation_risk}};
  if (opt.baseline_set)
    metrics.emplace("diagnosis", to_json(diagnose(train_risk, validation_risk, opt.baseline)));
  write_file_atomic(out_file(opt, "metrics.json").string(), JsonValue(metrics).dump(2));
  return kExitOk;
}

LinearHypothesis load_model(const CommonOptions& opt) {
  const std::string path =
      opt.model_path.empty() ? out_file(opt, "model.json").string() : opt.model_path;
  if (!std::filesystem::exists(path))
    throw ConfigError("model file '" + path + "' not found; train first or pass --model");
  return hypothesis_from_json_file(path);
}

int suite_robustness(const CommonOptions& opt, const Dataset& data) {
  const LinearHypothesis h = load_model(opt);
  const LossKind loss = parse_loss(opt.loss_text);
  const RobustnessReport report =
      robustness_report(data, h, loss, PerPointBall::l2(opt.eta));
  write_file_atomic(out_file(opt, "robustness.report.json").string(),
                    JsonValue(JsonValue::Object{{"report", to_json(report)}}).dump(2));
  if (opt.threshold >= 0.0 && report.robust_risk - report.clean_risk > opt.threshold)
    return kExitAuditFlag;
  return kExitOk;
}

int suite_fairness(const CommonOptions& opt, const Dataset& data) {
  const LinearHypothesis h = load_model(opt);
  const LossKind loss = parse_loss(opt.loss_text);
  FairnessReport groups = group_risk(data, h, loss);

  // Default taus from the data scale, as documented in the README.
  std::vector<double> dists;
  const Eigen::Index m = std::min<Eigen::Index>(data.size(), 200);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      dists.push_back((data.X.row(i) - data.X.row(j)).norm());
  std::sort(dists.begin(), dists.end());
  const double median_dist = dists.empty() ? 1.0 : dists[dists.size() / 2];
  const double label_sd = std::sqrt(
      (data.y.array() - data.y.mean()).square().sum() / static_cast<double>(data.size()));
  const double tau_d = std::max(1e-12, 0.1 * median_dist);
  const double tau_out = 0.1 * label_sd;

  const FairnessReport individual = individual_fairness_audit(h, data, {}, tau_d, tau_out);
  groups.individual_violations = individual.individual_violations;
  groups.proxy_accuracy = individual.proxy_accuracy;
  groups.proxy_leakage_warning = individual.proxy_leakage_warning;

  write_file_atomic(out_file(opt, "fairness.report.json").string(),
                    JsonValue(JsonValue::Object{{"report", to_json(groups)},
                                                {"tauD", tau_d},
                                                {"tauOut", tau_out}})
                        .dump(2));
  const double gap_threshold = opt.threshold >= 0.0 ? opt.threshold : 0.1;
  return groups.max_gap > gap_threshold ? kExitAuditFlag : kExitOk;
}

int suite_privacy(const CommonOptions& opt, const Dataset& data) {
  const double lo = data.y.minCoeff();
  const double hi_raw = data.y.maxCoeff();
  const double hi = hi_raw > lo ? hi_raw : lo + 1.0;
  const double sensitivity = (hi - lo) / static_cast<double>(data.size());
  const double scale = opt.noise_scale >= 0.0 ? opt.noise_scale : sensitivity / opt.epsilon;

  Dataset neighbor = data;
  neighbor.y[data.size() - 1] = neighbor.y[data.size() - 1] == hi ? lo : hi;

  const Mechanism mech = make_laplace_mean_mechanism(lo, hi, scale);
  DpAuditReport report = dp_audit(mech, scale > 0.0 ? "laplaceMeanQuery" : "zeroNoiseMeanQuery",
                                  data, neighbor, opt.epsilon, opt.trials, opt.bins, opt.seed);
  report.delta = opt.delta;

  // Decision-region inversion check: shallow-tree leaves holding fewer than
  // k training points are reported (informational; the exit code follows the
  // DP audit).
  const TreeHypothesis tree = fit_tree(data, 2, 1);
  JsonValue::Array flagged_leaves;
  for (const auto& leaf : audit_tree_regions(tree, data, opt.region_k)) {
    JsonValue::Array bounds;
    for (const auto& interval : leaf.region)
      bounds.emplace_back(JsonValue::Object{{"hi", interval.hi}, {"lo", interval.lo}});
    flagged_leaves.emplace_back(JsonValue::Object{{"bounds", std::move(bounds)},
                                                  {"support", leaf.support}});
  }
  JsonValue::Object region_audit{{"flaggedLeaves", std::move(flagged_leaves)},
                                 {"k", opt.region_k}};

  write_file_atomic(out_file(opt, "privacy.report.json").string(),
                    JsonValue(JsonValue::Object{{"regionAudit", std::move(region_audit)},
                                                {"report", to_json(report)}})
                        .dump(2));
  return report.pass ? kExitOk : kExitAuditFlag;
}

int suite_explainability(const CommonOptions& opt, const Dataset& data) {
  const LinearHypothesis h = load_model(opt);
  const LossKind loss = parse_loss(opt.loss_text);

  FitResult loaded;  // wraps the loaded model for the card
  loaded.hypothesis = h;
  loaded.best_objective = empirical_risk(data, h, loss);
  loaded.train_risk = loaded.best_objective;

  const auto [train, validation] = split(data, opt.train_fraction, opt.seed);
  const ModelCard card = model_card(loaded, train, validation, loss);

  const Eigen::Index k = std::min<Eigen::Index>(3, data.dim());
  const auto explanation =
      predict_with_explanation(h, data.X.row(0).transpose(), k, data.feature_names).first;

  JsonValue::Object body{{"explanationForFirstRow", to_json(explanation)},
                         {"modelCard", to_json(card)}};
  bool flagged = false;
  if (!opt.oracle_path.empty()) {
    const Dataset probes = load_csv(opt.oracle_path, parse_schema(opt.schema_text),
                                    parse_task(opt.task_text));
    UserOracle oracle{probes.X, probes.y};
    const double score = simulatability_score(h, oracle, loss);
    body.emplace("simulatabilityScore", score);
    if (opt.threshold >= 0.0 && score > opt.threshold) flagged = true;
  }
  write_file_atomic(out_file(opt, "explainability.report.json").string(),
                    JsonValue(body).dump(2));
  return flagged ? kExitAuditFlag : kExitOk;
}

int cmd_audit(const CommonOptions& opt) {
  const Dataset data = load_csv(opt.data_path, parse_schema(opt.schema_text),
                                parse_task(opt.task_text));
  std::vector<std::string> suites;
  if (opt.suite == "all") {
    suites = {"robustness", "privacy", "fairness", "explainability"};
  } else {
    suites = {opt.suite};
  }
  auto run_suite = [&](const std::string& name) {
    if (name == "robustness") return suite_robustness(opt, data);
    if (name == "privacy") return suite_privacy(opt, data);
    if (name == "fairness") return suite_fairness(opt, data);
    if (name == "explainability") return suite_explainability(opt, data);
    throw ConfigError("unknown suite '" + name + "'");
  };
  int worst = kExitOk;
  if (opt.parallel && suites.size() > 1) {
    std::vector<std::future<int>> futures;
    futures.reserve(suites.size());
    for (const auto& name : suites)
      futures.push_back(std::async(std::launch::async, run_suite, name));
    for (auto& f : futures) worst = std::max(worst, f.get());
  } else {
    for (const auto& name : suites) worst = std::max(worst, run_suite(name));
  }
  return worst;
}

GaussianModel model_from_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model parameter file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model parameter file: ") + e.what());
  }
  GaussianModel model;
  const auto& sxx = j.at("sigma_xx");
  const auto d = static_cast<Eigen::Index>(sxx.size());
  model.sigma_xx.resize(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      model.sigma_xx(r, c) = sxx[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                                 .get<double>();
  model.c_xs.resize(d);
  model.c_xy.resize(d);
  for (Eigen::Index r = 0; r < d; ++r) {
    model.c_xs[r] = j.at("c_xs")[static_cast<std::size_t>(r)].get<double>();
    model.c_xy[r] = j.at("c_xy")[static_cast<std::size_t>(r)].get<double>();
  }
  model.var_s = j.at("var_s").get<double>();
  model.var_y = j.at("var_y").get<double>();
  model.cov_sy = j.value("cov_sy", 0.0);
  return model;
}

GaussianModel model_from_dataset(const Dataset& d) {
  const Eigen::Index m = d.size();
  const Eigen::Index dim = d.dim();
  const Vector x_mean = d.X.colwise().mean().transpose();
  const Matrix centered = d.X.rowwise() - x_mean.transpose();
  GaussianModel model;
  model.sigma_xx = (centered.transpose() * centered) / static_cast<double>(m);
  model.c_xs = cross_covariance(d);
  const double y_mean = d.y.mean();
  model.c_xy = (centered.transpose() * (d.y.array() - y_mean).matrix()) /
               static_cast<double>(m);
  model.var_y = (d.y.array() - y_mean).square().sum() / static_cast<double>(m);

  Vector s_values(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::string& name = d.group_names[static_cast<std::size_t>((*d.s)[i])];
    char* end = nullptr;
    const double parsed = std::strtod(name.c_str(), &end);
    s_values[i] = (end != name.c_str() && *end == '\0') ? parsed
                                                        : static_cast<double>((*d.s)[i]);
  }
  const double s_mean = s_values.mean();
  model.var_s = (s_values.array() - s_mean).square().sum() / static_cast<double>(m);
  model.cov_sy =
      ((s_values.array() - s_mean) * (d.y.array() - y_mean)).sum() / static_cast<double>(m);
  return model;
}

int cmd_funnel(const CommonOptions& opt) {
  GaussianModel model;
  if (!opt.model_params_path.empty()) {
    model = model_from_params_file(opt.model_params_path);
  } else if (!opt.data_path.empty()) {
    const Dataset data = load_csv(opt.data_path, parse_schema(opt.schema_text),
                                  parse_task(opt.task_text));
    model = model_from_dataset(data);
  } else {
    throw ConfigError("funnel needs --data or --model-params");
  }
  const FunnelResult result = privacy_funnel_sweep(model, opt.directions, opt.seed);

  std::string csv = "I_yz,I_sz";
  for (Eigen::Index j = 0; j < model.dim(); ++j) csv += ",f_" + std::to_string(j);
  csv += "\n";
  for (const auto& p : result.frontier) {
    csv += format_double(p.mi_label) + "," + format_double(p.mi_sensitive);
    for (Eigen::Index j = 0; j < p.direction.size(); ++j)
      csv += "," + format_double(p.direction[j]);
    csv += "\n";
  }
  write_file_atomic(out_file(opt, "funnel.csv").string(), csv);
  return kExitOk;
}

void add_common_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--data", opt.data_path, "input CSV file");
  cmd->add_option("--schema", opt.schema_text,
                  "column roles, e.g. label=y,sensitive=g,weight=w");
  cmd->add_option("--task", opt.task_text, "regression | classification");
  cmd->add_option("--loss", opt.loss_text, "squared | absolute | huber[:delta] | logistic");
  cmd->add_option("--reg", opt.reg_text, "terms like l2:0.1,l1:0.05,ball2:1,fair:0.5");
  cmd->add_option("--alpha", opt.alpha, "coefficient for --reg terms given without a value");
  cmd->add_option("--eta", opt.eta, "robustness budget (per-point l2 ball radius)");
  cmd->add_option("--epsilon", opt.epsilon, "privacy parameter");
  cmd->add_option("--delta", opt.delta, "privacy parameter delta");
  cmd->add_option("--seed", opt.seed, "seed; all randomness derives from it")->required();
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--baseline", opt.baseline, "baseline error for diagnosis")
      ->each([&opt](const std::string&) { opt.baseline_set = true; });
  cmd->add_option("--train-fraction", opt.train_fraction, "train split fraction");
  cmd->add_option("--max-iter", opt.max_iter, "solver iteration cap");
  cmd->add_option("--step", opt.step_scale, "solver step scale c in c/sqrt(t+1)");
  cmd->add_option("--tol", opt.tol, "solver convergence tolerance");
  cmd->add_option("--model", opt.model_path, "trained model.json (audits)");
  cmd->add_option("--model-params", opt.model_params_path, "Gaussian model JSON (funnel)");
  cmd->add_option("--oracle", opt.oracle_path, "user oracle CSV (explainability)");
  cmd->add_option("--pseudo", opt.pseudo_path, "pseudo-labeled CSV merged into the objective");
  cmd->add_option("--pseudo-weight", opt.pseudo_weight, "weight of each pseudo point");
  cmd->add_option("--trials", opt.trials, "DP audit trials per dataset");
  cmd->add_option("--bins", opt.bins, "DP audit histogram bins");
  cmd->add_option("--noise-scale", opt.noise_scale, "override Laplace scale (0 = no noise)");
  cmd->add_option("--threshold", opt.threshold, "audit flag threshold");
  cmd->add_option("--directions", opt.directions, "funnel sweep directions");
  cmd->add_option("--k", opt.region_k, "minimum datapoints per tree region");
  cmd->add_flag("--parallel", opt.parallel, "run independent audit suites concurrently");
  cmd->set_config("--config", "", "flat key=value config file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trustworthy ERM training and audit toolkit"};
  app.require_subcommand(1);
  CommonOptions opt;

  // Options live on the root so a flat key=value --config file reaches them;
  // subcommands select the action and let their flags fall through.
  add_common_options(&app, opt);
  app.add_option("--suite", opt.suite,
                 "robustness | privacy | fairness | explainability | all");
  CLI::App* train = app.add_subcommand("train", "fit a linear model and write model/metrics");
  CLI::App* audit = app.add_subcommand("audit", "run an audit suite against a trained model");
  CLI::App* funnel = app.add_subcommand("funnel", "sweep the privacy funnel and write plot data");
  train->fallthrough();
  audit->fallthrough();
  funnel->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(opt);
    if (audit->parsed()) {
      if (opt.suite.empty()) throw ConfigError("audit needs --suite");
      return cmd_audit(opt);
    }
    if (funnel->parsed()) return cmd_funnel(opt);
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
