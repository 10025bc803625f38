#pragma once

#include <stdexcept>
#include <string>

namespace rotortrap {

// Exit-code families used by the CLI: 2 = configuration/input error,
// 3 = numerical failure, 4 = fit non-convergence.
class Error : public std::runtime_error {
public:
    Error(const std::string& msg, int exit_code)
        : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg, 2) {}
};

// An invariant on a physical parameter set failed; message names the invariant.
class ConstraintViolation : public ConfigError {
public:
    explicit ConstraintViolation(const std::string& msg) : ConfigError(msg) {}
};

class PulseTooLong : public ConfigError {
public:
    explicit PulseTooLong(const std::string& msg) : ConfigError(msg) {}
};

// Non-parallel-field requirement of the two-field reconstruction violated.
class DegenerateGeometry : public ConfigError {
public:
    explicit DegenerateGeometry(const std::string& msg) : ConfigError(msg) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg, 3) {}
};

class StepFailure : public NumericalError {
public:
    explicit StepFailure(const std::string& msg) : NumericalError(msg) {}
};

class QuadratureFailure : public NumericalError {
public:
    explicit QuadratureFailure(const std::string& msg) : NumericalError(msg) {}
};

class InsufficientData : public NumericalError {
public:
    explicit InsufficientData(const std::string& msg) : NumericalError(msg) {}
};

class WindowOutOfRange : public NumericalError {
public:
    explicit WindowOutOfRange(const std::string& msg) : NumericalError(msg) {}
};

class BoundaryNotFound : public NumericalError {
public:
    explicit BoundaryNotFound(const std::string& msg) : NumericalError(msg) {}
};

// Coinciding quadrupole or trap-geometry eigenvalues: isolated equilibria
// degenerate into continua.
class DegenerateSpectrum : public NumericalError {
public:
    explicit DegenerateSpectrum(const std::string& msg) : NumericalError(msg) {}
};

class NonConvergence : public Error {
public:
    explicit NonConvergence(const std::string& msg) : Error(msg, 4) {}
};

} // namespace rotortrap
