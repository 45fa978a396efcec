#pragma once

#include <stdexcept>
#include <string>

namespace shl {

enum class ErrorKind {
    InvalidInput,
    IndexOutOfRange,
    DivisionByZero,
    NotInCone,
    NoRealRoots,
    InconsistentSpec,
    DegenerateEigenbasis,
    DegenerateSpectrum,
    NonpositiveOperatorValue,
    ConditionViolated,
    StencilOutOfDomain,
    NoAdmissibleStart,
    StalledLineSearch,
    LinearSolveFailure,
    InadmissibleExact,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::NotInCone: return "NotInCone";
    case ErrorKind::NoRealRoots: return "NoRealRoots";
    case ErrorKind::InconsistentSpec: return "InconsistentSpec";
    case ErrorKind::DegenerateEigenbasis: return "DegenerateEigenbasis";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::NonpositiveOperatorValue: return "NonpositiveOperatorValue";
    case ErrorKind::ConditionViolated: return "ConditionViolated";
    case ErrorKind::StencilOutOfDomain: return "StencilOutOfDomain";
    case ErrorKind::NoAdmissibleStart: return "NoAdmissibleStart";
    case ErrorKind::StalledLineSearch: return "StalledLineSearch";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::InadmissibleExact: return "InadmissibleExact";
    }
    return "Unknown";
}

/// Numerical failures (eigensolver, linear solve) as opposed to bad input or
/// a violated mathematical precondition.
inline bool is_numerical_failure(ErrorKind kind) {
    return kind == ErrorKind::DegenerateEigenbasis || kind == ErrorKind::LinearSolveFailure ||
           kind == ErrorKind::StalledLineSearch;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace shl
