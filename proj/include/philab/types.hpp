#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace philab {

using Real = double;
using Complex = std::complex<Real>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr Real kPi = 3.14159265358979323846;
inline constexpr Real kTwoPi = 2.0 * kPi;

enum class ErrorCode {
    PoleOnAxis,
    NegativeDelay,
    ZeroDenominator,
    InsufficientCoverage,
    AmbiguousCrossing,
    DomainError,
    ConfigError,
    NonSettled,
    ParseError,
    ValidationError,
    ConfigMismatch,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// ParseError that remembers the 1-based source line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorCode::ParseError,
                (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline Real hz_to_rad(Real f_hz) { return kTwoPi * f_hz; }
inline Real rad_to_hz(Real w) { return w / kTwoPi; }
inline Real rad_to_deg(Real r) { return r * 180.0 / kPi; }
inline Real deg_to_rad(Real d) { return d * kPi / 180.0; }

} // namespace philab
