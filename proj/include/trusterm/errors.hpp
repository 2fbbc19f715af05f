#ifndef TRUSTERM_ERRORS_HPP
#define TRUSTERM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace trusterm {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define TRUSTERM_DEFINE_ERROR(name)                          \
  class name : public Error {                                \
   public:                                                   \
    explicit name(const std::string& msg) : Error(msg) {}    \
  }

TRUSTERM_DEFINE_ERROR(DimensionError);
TRUSTERM_DEFINE_ERROR(TaskMismatchError);
TRUSTERM_DEFINE_ERROR(EmptyDatasetError);
TRUSTERM_DEFINE_ERROR(SchemaError);
TRUSTERM_DEFINE_ERROR(ParseError);
TRUSTERM_DEFINE_ERROR(DegenerateDatasetError);
TRUSTERM_DEFINE_ERROR(NotBinaryError);
TRUSTERM_DEFINE_ERROR(InvalidDatasetError);
TRUSTERM_DEFINE_ERROR(UnsupportedTrainingLossError);
TRUSTERM_DEFINE_ERROR(NumericalError);
TRUSTERM_DEFINE_ERROR(InvalidBaselineError);
TRUSTERM_DEFINE_ERROR(UnsupportedLossError);
TRUSTERM_DEFINE_ERROR(OracleSizeError);
TRUSTERM_DEFINE_ERROR(UndefinedRadiusError);
TRUSTERM_DEFINE_ERROR(DegenerateProbesError);
TRUSTERM_DEFINE_ERROR(MissingSensitiveError);
TRUSTERM_DEFINE_ERROR(InfiniteMIError);
TRUSTERM_DEFINE_ERROR(NotPositiveDefiniteError);
TRUSTERM_DEFINE_ERROR(StrongConvexityRequiredError);
TRUSTERM_DEFINE_ERROR(NotNeighborsError);
TRUSTERM_DEFINE_ERROR(EmptyGroupError);
TRUSTERM_DEFINE_ERROR(DegenerateMetricError);
TRUSTERM_DEFINE_ERROR(EmptyOracleError);
TRUSTERM_DEFINE_ERROR(RangeError);
TRUSTERM_DEFINE_ERROR(ConfigError);

#undef TRUSTERM_DEFINE_ERROR

}  // namespace trusterm

#endif  // TRUSTERM_ERRORS_HPP
