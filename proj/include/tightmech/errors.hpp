// SPDX-License-Identifier: MIT
//
// Exception types shared by all modules.  Report-only operations never throw;
// everything else signals contract breaches with one of these.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tightmech {

// An argument lies outside the documented domain (effort outside [0,1], a
// type outside the grid span, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A computed object failed a structural certificate (Λ-membership, refund
// bounds, ...).  Usually signals a grid that is too coarse.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The per-type maximisation could not be certified (e.g. the envelope is not
// unimodal on the coarse scan).
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, std::size_t knot)
        : std::runtime_error(what), knot_(knot) {}
    [[nodiscard]] std::size_t knot() const noexcept { return knot_; }

private:
    std::size_t knot_;
};

// The regime labels of a tight mechanism do not form consecutive intervals.
class ClassificationAmbiguity : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The brute-force oracle found no feasible tuple at a type.
class InfeasibleAtType : public std::runtime_error {
public:
    InfeasibleAtType(const std::string& what, double y)
        : std::runtime_error(what), y_(y) {}
    [[nodiscard]] double type() const noexcept { return y_; }

private:
    double y_;
};

// Malformed configuration or data file.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tightmech
