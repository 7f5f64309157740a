#pragma once

#include <stdexcept>
#include <string>

namespace qflux {

// Root of every library error; the CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruncationError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct DegenerateMapError : Error { using Error::Error; };
struct OverflowError : Error { using Error::Error; };
struct IncommensurateError : Error { using Error::Error; };
struct WindowError : Error { using Error::Error; };
struct UndefinedRatioError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };

}  // namespace qflux
