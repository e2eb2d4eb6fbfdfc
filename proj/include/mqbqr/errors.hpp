#pragma once

#include <stdexcept>
#include <string>

namespace mqbqr {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Operation would divide by zero (degenerate ripple target, zero current, ...).
class DivisionError : public Error {
public:
    using Error::Error;
};

// Requested output voltage is not reachable with a duty ratio in (0, 1).
class AchievabilityError : public Error {
public:
    AchievabilityError(const std::string& what, double vo_min, double vo_max)
        : Error(what), vo_min_(vo_min), vo_max_(vo_max) {}
    double vo_min() const noexcept { return vo_min_; }
    double vo_max() const noexcept { return vo_max_; }

private:
    double vo_min_;
    double vo_max_;
};

// A state became non-finite during integration.
class DivergedError : public Error {
public:
    DivergedError(const std::string& what, std::string phase, double last_stable_time = 0.0)
        : Error(what), phase_(std::move(phase)), last_stable_time_(last_stable_time) {}
    const std::string& phase() const noexcept { return phase_; }
    double last_stable_time() const noexcept { return last_stable_time_; }

private:
    std::string phase_;
    double last_stable_time_;
};

// Cycle map has spectral radius >= 1.
class UnstableOrbitError : public Error {
public:
    UnstableOrbitError(const std::string& what, double rho) : Error(what), rho_(rho) {}
    double spectral_radius() const noexcept { return rho_; }

private:
    double rho_;
};

// (I - Phi) or A_av is singular to working precision.
class MarginalStabilityError : public Error {
public:
    MarginalStabilityError(const std::string& what, double rho = 1.0) : Error(what), rho_(rho) {}
    double spectral_radius() const noexcept { return rho_; }

private:
    double rho_;
};

// No ANFIS rule fires for the given input.
class CoverageError : public Error {
public:
    using Error::Error;
};

// Evaluation exactly at a pole of a rational function.
class PoleError : public Error {
public:
    using Error::Error;
};

}  // namespace mqbqr
