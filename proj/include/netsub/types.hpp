#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace netsub {

/// Dense agent index inside an Environment (0..N-1).
using AgentId = std::uint32_t;

/// Model month, 1-based. kNever sorts after every real month so that
/// "j subscribes in month t" is simply `tau_j <= t`.
using Month = std::int32_t;
inline constexpr Month kNever = std::numeric_limits<Month>::max();
/// Marker in per-agent fixed-date tables meaning "free to choose".
inline constexpr Month kFree = 0;

inline bool adopted(Month tau) { return tau != kNever; }

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UnknownAgent : public Error {
public:
    explicit UnknownAgent(std::uint64_t id)
        : Error("unknown agent id " + std::to_string(id)), id_(id) {}
    std::uint64_t id() const { return id_; }

private:
    std::uint64_t id_;
};

/// Raised when adaptive quadrature could not reach its tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double value, double error_estimate)
        : Error(what + " (value " + std::to_string(value) + ", error estimate " +
                std::to_string(error_estimate) + ")"),
          value_(value), error_(error_estimate) {}
    double value() const { return value_; }
    double error_estimate() const { return error_; }

private:
    double value_;
    double error_;
};

}  // namespace netsub
