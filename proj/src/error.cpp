#include "nhimpact/error.hpp"

#include <utility>

namespace nhimpact
{

std::string_view to_string(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::RankDeficient:
      return "RankDeficient";
    case ErrorKind::SingularGram:
      return "SingularGram";
    case ErrorKind::NestingViolated:
      return "NestingViolated";
    case ErrorKind::MuOutOfRange:
      return "MuOutOfRange";
    case ErrorKind::InadmissiblePreVelocity:
      return "InadmissiblePreVelocity";
    case ErrorKind::InvalidMetric:
      return "InvalidMetric";
    case ErrorKind::SingularKKT:
      return "SingularKKT";
    case ErrorKind::BisectionStall:
      return "BisectionStall";
    case ErrorKind::GrazingImpact:
      return "GrazingImpact";
    case ErrorKind::WallPenetration:
      return "WallPenetration";
    case ErrorKind::SchemaError:
      return "SchemaError";
    case ErrorKind::IoError:
      return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::NestingViolated:
    case ErrorKind::MuOutOfRange:
    case ErrorKind::InvalidMetric:
    case ErrorKind::SchemaError:
    case ErrorKind::IoError:
      return 2;
    default:
      return 3;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
  : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
{
}

SchemaError::SchemaError(std::string field, const std::string& reason)
  : Error(ErrorKind::SchemaError, "at \"" + field + "\": " + reason), field_(std::move(field))
{
}

}  // namespace nhimpact
