#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nhimpact
{

enum class ErrorKind
{
  RankDeficient,
  SingularGram,
  NestingViolated,
  MuOutOfRange,
  InadmissiblePreVelocity,
  InvalidMetric,
  SingularKKT,
  BisectionStall,
  GrazingImpact,
  WallPenetration,
  SchemaError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// CLI exit status for a failure of this kind: 2 for schema/validation
// failures, 3 for numerical failures.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Schema errors always carry the offending field path ("params.mass",
// "integrator.dt", ...).
class SchemaError : public Error
{
public:
  SchemaError(std::string field, const std::string& reason);

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

}  // namespace nhimpact
