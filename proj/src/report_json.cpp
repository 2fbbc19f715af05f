#include "trusterm/report_json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace trusterm {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void escape_string(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void newline_indent(std::string& out, int indent, int depth) {
  if (indent <= 0) return;
  out += '\n';
  out.append(static_cast<std::size_t>(indent * depth), ' ');
}

}  // namespace

void JsonValue::dump_to(std::string& out, int indent, int depth) const {
  if (std::holds_alternative<std::nullptr_t>(value_)) {
    out += "null";
  } else if (const auto* b = std::get_if<bool>(&value_)) {
    out += *b ? "true" : "false";
  } else if (const auto* d = std::get_if<double>(&value_)) {
    out += format_double(*d);
  } else if (const auto* l = std::get_if<long>(&value_)) {
    out += std::to_string(*l);
  } else if (const auto* s = std::get_if<std::string>(&value_)) {
    escape_string(out, *s);
  } else if (const auto* a = std::get_if<Array>(&value_)) {
    if (a->empty()) {
      out += "[]";
      return;
    }
    out += '[';
    for (std::size_t i = 0; i < a->size(); ++i) {
      if (i) out += ',';
      newline_indent(out, indent, depth + 1);
      (*a)[i].dump_to(out, indent, depth + 1);
    }
    newline_indent(out, indent, depth);
    out += ']';
  } else if (const auto* o = std::get_if<Object>(&value_)) {
    if (o->empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (const auto& [key, value] : *o) {
      if (!first) out += ',';
      first = false;
      newline_indent(out, indent, depth + 1);
      escape_string(out, key);
      out += indent > 0 ? ": " : ":";
      value.dump_to(out, indent, depth + 1);
    }
    newline_indent(out, indent, depth);
    out += '}';
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  if (indent > 0) out += '\n';
  return out;
}

JsonValue to_json(const LinearHypothesis& h, const std::vector<std::string>& feature_names) {
  JsonValue::Array weights;
  JsonValue::Array names;
  for (Eigen::Index j = 0; j < h.w.size(); ++j) {
    weights.emplace_back(h.w[j]);
    names.emplace_back(static_cast<std::size_t>(j) < feature_names.size()
                           ? feature_names[static_cast<std::size_t>(j)]
                           : "f" + std::to_string(j));
  }
  return JsonValue::Object{{"featureNames", std::move(names)},
                           {"intercept", h.b},
                           {"weights", std::move(weights)}};
}

JsonValue to_json(const DiagnosisReport& report) {
  return JsonValue::Object{{"baseline", report.baseline},
                           {"trainError", report.train_error},
                           {"validationError", report.validation_error},
                           {"verdict", std::string(to_string(report.verdict))}};
}

JsonValue to_json(const RobustnessReport& report) {
  JsonValue budget;
  if (const auto* ball = std::get_if<PerPointBall>(&report.budget)) {
    budget = JsonValue::Object{{"epsilon", ball->epsilon},
                               {"norm", std::string(ball->norm == BallNorm::L2 ? "l2" : "linf")},
                               {"type", "perPointBall"}};
  } else if (const auto* coupled = std::get_if<CoupledColumnL1>(&report.budget)) {
    budget = JsonValue::Object{{"eta", coupled->eta}, {"type", "coupledColumnL1"}};
  }
  JsonValue::Object o{{"budget", std::move(budget)},
                      {"cleanRisk", report.clean_risk},
                      {"empiricalLipschitz", report.empirical_lipschitz},
                      {"robustRisk", report.robust_risk}};
  if (report.min_local_radius) o.emplace("minLocalRadius", *report.min_local_radius);
  return o;
}

JsonValue to_json(const FairnessReport& report) {
  JsonValue::Object groups;
  for (const auto& [name, risk] : report.per_group_risk) groups.emplace(name, risk);
  JsonValue::Array violations;
  for (const auto& v : report.individual_violations) {
    violations.emplace_back(JsonValue::Object{{"distance", v.distance},
                                              {"i", static_cast<long>(v.i)},
                                              {"j", static_cast<long>(v.j)},
                                              {"outputGap", v.output_gap}});
  }
  return JsonValue::Object{{"maxGap", report.max_gap},
                           {"perGroupRisk", std::move(groups)},
                           {"proxyAccuracy", report.proxy_accuracy},
                           {"proxyLeakageWarning", report.proxy_leakage_warning},
                           {"violations", std::move(violations)},
                           {"weightsApplied", report.weights_applied}};
}

JsonValue to_json(const DpAuditReport& report) {
  return JsonValue::Object{
      {"bins", report.bins},
      {"delta", report.delta},
      {"epsilonClaimed", report.epsilon_claimed},
      {"epsilonEstimate", std::isfinite(report.epsilon_estimate)
                              ? JsonValue(report.epsilon_estimate)
                              : JsonValue(nullptr)},
      {"mechanism", report.mechanism},
      {"pass", report.pass},
      {"trials", report.trials}};
}

JsonValue to_json(const ModelCard& card) {
  JsonValue::Object o{{"configDigest", card.config_digest},
                      {"description", card.description},
                      {"limitations", card.limitations},
                      {"overallRisk", card.overall_risk},
                      {"validationError", card.validation_error}};
  if (!card.per_group_risk.empty()) {
    JsonValue::Object groups;
    for (const auto& [name, risk] : card.per_group_risk) groups.emplace(name, risk);
    o.emplace("perGroupRisk", std::move(groups));
  }
  return o;
}

JsonValue to_json(const Explanation& explanation) {
  JsonValue::Array contributions;
  for (const auto& c : explanation.top_features) {
    contributions.emplace_back(JsonValue::Object{{"index", static_cast<long>(c.feature)},
                                                 {"name", c.name},
                                                 {"value", c.value}});
  }
  return JsonValue::Object{{"contributions", std::move(contributions)},
                           {"prediction", explanation.prediction}};
}

JsonValue to_json(const DatasheetReport& report) {
  auto summary = [](const FeatureSummary& s) {
    return JsonValue::Object{{"max", s.max},
                             {"mean", s.mean},
                             {"min", s.min},
                             {"name", s.name},
                             {"stddev", s.stddev}};
  };
  JsonValue::Array features;
  for (const auto& f : report.features) features.emplace_back(summary(f));
  JsonValue::Object o{{"columnCount", report.column_count},
                      {"createdAt", report.created_at},
                      {"features", std::move(features)},
                      {"label", summary(report.label)},
                      {"missingValues", report.missing_values},
                      {"provenance", report.provenance},
                      {"rowCount", report.row_count}};
  if (!report.group_counts.empty()) {
    JsonValue::Object groups;
    for (const auto& [name, count] : report.group_counts) groups.emplace(name, count);
    o.emplace("groupCounts", std::move(groups));
  }
  return o;
}

LinearHypothesis hypothesis_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path + "': " + e.what());
  }
  if (!j.contains("model")) throw ParseError("model file lacks a 'model' object");
  const auto& model = j["model"];
  LinearHypothesis h;
  const auto& weights = model.at("weights");
  h.w.resize(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t k = 0; k < weights.size(); ++k)
    h.w[static_cast<Eigen::Index>(k)] = weights[k].get<double>();
  h.b = model.at("intercept").get<double>();
  return h;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp + "'");
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ConfigError("cannot rename '" + tmp + "' to '" + path + "'");
}

}  // namespace trusterm
