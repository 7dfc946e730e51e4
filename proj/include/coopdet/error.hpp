// error.hpp: exception hierarchy shared by all coopdet modules

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace coopdet {

// Base class; `kind()` is the machine-readable tag surfaced by the CLI.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

// A DetectorSpec or configuration document failed validation.
class SpecError : public Error {
public:
    explicit SpecError(std::vector<std::string> violations);
    SpecError(std::string key, const std::string& message);

    const std::vector<std::string>& violations() const noexcept { return violations_; }
    // Offending key for document-level errors (empty for invariant violations).
    const std::string& key() const noexcept { return key_; }
    const char* kind() const noexcept override { return "spec"; }

private:
    std::vector<std::string> violations_;
    std::string key_;
};

// A linear solve hit a (numerically) singular resolvent.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double omega0)
        : Error(what), omega0_(omega0) {}
    double omega0() const noexcept { return omega0_; }
    const char* kind() const noexcept override { return "numerical"; }

private:
    double omega0_;
};

// Time integration failed: step size underflow, step budget, or a broken
// density-matrix invariant.
class IntegrationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "integration"; }
};

// An iterative limit did not settle; carries the sequence computed so far.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> partial)
        : Error(what), partial_(std::move(partial)) {}
    const std::vector<double>& partial() const noexcept { return partial_; }
    const char* kind() const noexcept override { return "convergence"; }

private:
    std::vector<double> partial_;
};

// No decay rate in the calibration bracket reaches the efficiency floor.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double best_efficiency)
        : Error(what), best_efficiency_(best_efficiency) {}
    double best_efficiency() const noexcept { return best_efficiency_; }
    const char* kind() const noexcept override { return "infeasible"; }

private:
    double best_efficiency_;
};

// Moments requested for a response with zero total detection probability.
class UndefinedMomentsError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "undefined_moments"; }
};

}  // namespace coopdet
