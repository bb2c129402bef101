// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bomi {

/// Coarse error class used by the CLI to pick an exit status.
enum class ErrorCategory { Input, Numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), category_(category), kind_(std::move(kind)), detail_(what) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

private:
  ErrorCategory category_;
  std::string kind_;
  std::string detail_;
};

#define BOMI_DEFINE_ERROR(Name, Category, Kind)                                     \
  class Name : public Error {                                                       \
  public:                                                                           \
    explicit Name(const std::string& what) : Error(ErrorCategory::Category, Kind, what) {} \
  }

BOMI_DEFINE_ERROR(ParseError, Input, "parse error");
BOMI_DEFINE_ERROR(AlignmentError, Input, "alignment error");
BOMI_DEFINE_ERROR(SchemaError, Input, "schema error");
BOMI_DEFINE_ERROR(ValidationError, Input, "validation error");
BOMI_DEFINE_ERROR(SplitError, Input, "spec error");
BOMI_DEFINE_ERROR(RangeError, Input, "range error");
BOMI_DEFINE_ERROR(LayoutError, Input, "layout error");
BOMI_DEFINE_ERROR(ShapeError, Input, "shape error");
BOMI_DEFINE_ERROR(CoverageError, Input, "coverage error");
BOMI_DEFINE_ERROR(DataError, Input, "data error");
BOMI_DEFINE_ERROR(DimensionError, Input, "dimension mismatch");
BOMI_DEFINE_ERROR(CorruptFileError, Input, "corrupt file");
BOMI_DEFINE_ERROR(VersionError, Input, "version mismatch");
BOMI_DEFINE_ERROR(MappingError, Input, "mapping error");
BOMI_DEFINE_ERROR(CalibrationError, Input, "insufficient calibration");
BOMI_DEFINE_ERROR(IoError, Input, "i/o error");
BOMI_DEFINE_ERROR(ConfigError, Input, "config error");
BOMI_DEFINE_ERROR(AttitudeError, Numerical, "undefined attitude");
BOMI_DEFINE_ERROR(HeadingError, Numerical, "undefined heading");
BOMI_DEFINE_ERROR(DegenerateRangeError, Input, "degenerate range");
BOMI_DEFINE_ERROR(SingularityError, Numerical, "singular covariance");

#undef BOMI_DEFINE_ERROR

}  // namespace bomi
