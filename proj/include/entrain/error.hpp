#pragma once

#include <stdexcept>
#include <string>

namespace entrain {

enum class ErrorKind {
    InvalidInput,
    NumericFailure,
    Evaluation,
    Configuration,
    AssumptionViolated,
    Structural,
    SynthesisInfeasible,
    IntegrationFailure,
    Divergence,
    Periodization,
    InsufficientData,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::NumericFailure: return "numeric-failure";
        case ErrorKind::Evaluation: return "evaluation";
        case ErrorKind::Configuration: return "configuration";
        case ErrorKind::AssumptionViolated: return "assumption-violated";
        case ErrorKind::Structural: return "structural";
        case ErrorKind::SynthesisInfeasible: return "synthesis-infeasible";
        case ErrorKind::IntegrationFailure: return "integration-failure";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Periodization: return "periodization";
        case ErrorKind::InsufficientData: return "insufficient-data";
    }
    return "unknown";
}

/// Base exception for every failure raised by the library. The kind drives
/// CLI exit codes; the message is meant for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Iterative method ran out of budget; carries the residual it reached.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& message, double residual)
        : Error(ErrorKind::NumericFailure, message), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// ODE integration stopped early; carries the last time that was reached
/// with an accepted step.
class IntegrationError : public Error {
public:
    IntegrationError(ErrorKind kind, const std::string& message, double last_good_time)
        : Error(kind, message), last_good_time_(last_good_time) {}

    double last_good_time() const noexcept { return last_good_time_; }

private:
    double last_good_time_;
};

}  // namespace entrain
