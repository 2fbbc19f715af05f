#ifndef TRUSTERM_REPORT_JSON_HPP
#define TRUSTERM_REPORT_JSON_HPP

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "trusterm/data.hpp"
#include "trusterm/explainability.hpp"
#include "trusterm/fairness.hpp"
#include "trusterm/privacy.hpp"
#include "trusterm/robustness.hpp"
#include "trusterm/solver.hpp"

namespace trusterm {

// Minimal JSON value with byte-stable output: lexicographic object keys and
// 17-significant-digit numbers, so identical reports serialize identically.
class JsonValue {
 public:
  using Array = std::vector<JsonValue>;
  using Object = std::map<std::string, JsonValue>;

  JsonValue() : value_(nullptr) {}
  JsonValue(std::nullptr_t) : value_(nullptr) {}
  JsonValue(bool b) : value_(b) {}
  JsonValue(double d) : value_(d) {}
  JsonValue(long l) : value_(l) {}
  JsonValue(int i) : value_(static_cast<long>(i)) {}
  JsonValue(const char* s) : value_(std::string(s)) {}
  JsonValue(std::string s) : value_(std::move(s)) {}
  JsonValue(Array a) : value_(std::move(a)) {}
  JsonValue(Object o) : value_(std::move(o)) {}

  std::string dump(int indent = 0) const;

 private:
  void dump_to(std::string& out, int indent, int depth) const;
  std::variant<std::nullptr_t, bool, double, long, std::string, Array, Object> value_;
};

std::string format_double(double v);

JsonValue to_json(const LinearHypothesis& h, const std::vector<std::string>& feature_names);
JsonValue to_json(const DiagnosisReport& report);
JsonValue to_json(const RobustnessReport& report);
JsonValue to_json(const FairnessReport& report);
JsonValue to_json(const DpAuditReport& report);
JsonValue to_json(const ModelCard& card);
JsonValue to_json(const Explanation& explanation);
JsonValue to_json(const DatasheetReport& report);

// Parses numbers/strings back out of model.json (CLI round trip).
LinearHypothesis hypothesis_from_json_file(const std::string& path);

// Writes content to path atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace trusterm

#endif  // TRUSTERM_REPORT_JSON_HPP
