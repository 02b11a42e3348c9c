#pragma once

#include <stdexcept>
#include <string>

namespace hbmtherm {

// Error taxonomy shared by all modules. Each class maps to a process exit
// code so scripted sweeps can classify failures without parsing messages.
enum class ExitCode : int {
    Ok = 0,
    Validation = 2,
    Numerical = 3,
    Io = 4,
};

class Error : public std::runtime_error {
  public:
    Error(std::string msg, ExitCode code)
        : std::runtime_error(std::move(msg)), code_(code) {}
    ExitCode exit_code() const noexcept { return code_; }

  private:
    ExitCode code_;
};

// Bad argument or malformed input: out-of-range bank ids, shape mismatches,
// schema violations.
class DomainError : public Error {
  public:
    explicit DomainError(std::string msg)
        : Error(std::move(msg), ExitCode::Validation) {}
};

// Structurally unsolvable model, e.g. a network with no ambient sink asked
// for a steady state.
class ModelError : public Error {
  public:
    explicit ModelError(std::string msg)
        : Error(std::move(msg), ExitCode::Validation) {}
};

// A solve or integration that failed numerically (non-convergence,
// non-finite values, violated stability bounds).
class NumericalError : public Error {
  public:
    explicit NumericalError(std::string msg)
        : Error(std::move(msg), ExitCode::Numerical) {}
};

// A probe measurement that produced no usable signal.
class MeasurementError : public NumericalError {
  public:
    explicit MeasurementError(std::string msg)
        : NumericalError(std::move(msg)) {}
};

class IoError : public Error {
  public:
    explicit IoError(std::string msg)
        : Error(std::move(msg), ExitCode::Io) {}
};

} // namespace hbmtherm
