#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace quantsp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };

inline const char* to_string(Sense s) {
    return s == Sense::Minimize ? "minimize" : "maximize";
}

// Base error for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidBounds : Error { using Error::Error; };
struct UnknownVariable : Error { using Error::Error; };
struct BackendUnavailable : Error { using Error::Error; };
struct SolverError : Error { using Error::Error; };
struct SamplingExhausted : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct KindMismatch : Error { using Error::Error; };
struct UnboundedInput : Error { using Error::Error; };
struct Diverged : Error { using Error::Error; };
struct AllCandidatesFailed : Error { using Error::Error; };

inline bool approx_eq(double a, double b, double tol) {
    return std::abs(a - b) <= tol;
}

inline bool rel_eq(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace quantsp
