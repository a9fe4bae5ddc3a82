#pragma once

#include <stdexcept>
#include <string>

namespace ctp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDistribution : Error { using Error::Error; };
struct DimensionMismatch   : Error { using Error::Error; };
struct EmptyIntersection   : Error { using Error::Error; };
struct InvalidTemperature  : Error { using Error::Error; };
struct ShapeError          : Error { using Error::Error; };
struct MaskedStateError    : Error { using Error::Error; };
struct InsufficientData    : Error { using Error::Error; };
struct UndefinedDistribution : Error { using Error::Error; };
struct TrainingDiverged    : Error { using Error::Error; };
struct InvalidSchedule     : Error { using Error::Error; };
struct InstanceTooLarge    : Error { using Error::Error; };
struct EmptyEvaluation     : Error { using Error::Error; };
struct InvalidScene        : Error { using Error::Error; };
struct FormatError         : Error { using Error::Error; };

} // namespace ctp
