// SPDX-License-Identifier: MIT
//
// Candidate loss functions on a type grid (classes Λ0 and Λ) and the
// geometric primitives built on them: the minimal principal efforts α and β,
// the increasing selection ẑ, the running-maximum regularisation λ⁺ and the
// smoothing approximation.
#pragma once

#include "tightmech/model.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace tightmech {

enum class LossClass { Lambda0, Lambda };

// Piecewise-linear λ on an ascending grid y_0 = x_lo < ... < y_N = x_hi.
class LossFunction {
public:
    LossFunction() = default;
    // Validates against `cls` (and tau for Λ0's lower bound) and throws
    // InvariantViolation on failure.
    LossFunction(std::vector<double> grid, std::vector<double> values, LossClass cls, double tau,
                 double tol = 1e-12);

    static LossFunction from_function(const std::vector<double>& grid, const std::function<double(double)>& f,
                                      LossClass cls, double tau);

    [[nodiscard]] const std::vector<double>& grid() const noexcept { return grid_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return grid_.size(); }
    [[nodiscard]] double at(std::size_t i) const { return values_[i]; }
    [[nodiscard]] double operator()(double x) const;
    [[nodiscard]] LossClass cls() const noexcept { return cls_; }
    [[nodiscard]] double x_lo() const { return grid_.front(); }
    [[nodiscard]] double x_hi() const { return grid_.back(); }

    // Empty string when the values satisfy the class invariants, otherwise a
    // description of the first violation.
    [[nodiscard]] static std::string violation(const std::vector<double>& grid, const std::vector<double>& values,
                                               LossClass cls, double tau, double tol = 1e-12);

private:
    std::vector<double> grid_;
    std::vector<double> values_;
    LossClass cls_ = LossClass::Lambda0;
};

// α(y) = max{0, sup_{x in (y, x_hi]} (λ(x) - y)/(x - y)}, α(x_hi) = 0, clamped
// to [0,1].  The sup runs over knots above y plus the right-slope limit when
// λ(y) = y.  Throws DomainError outside the grid span.
[[nodiscard]] double alpha(const LossFunction& lam, double y);

// β(y, e_A) = max{0, max_x (λ(x) - λ(y) - u_A(e_A))/(x + τ)} over all knots.
[[nodiscard]] double beta(const Environment& env, const LossFunction& lam, double y, double e_A);

// Largest knot maximising (λ(x) - s)/(x + τ).
[[nodiscard]] double zhat(const Environment& env, const LossFunction& lam, double s);

// Fast repeated evaluation of max_x (λ(x) - s)/(x + τ) and its largest
// maximiser: upper convex hull of the knots plus a binary search, O(log N)
// per query.  Valid for any λ (the maximum of slopes from the external point
// (-τ, s) is always attained on the upper hull).
class RatioMaximizer {
public:
    RatioMaximizer(const LossFunction& lam, double tau);
    struct Result {
        double value;     // max ratio (may be negative)
        std::size_t knot; // index of the largest maximiser
    };
    [[nodiscard]] Result query(double s) const;

private:
    std::vector<double> hx_;   // hull abscissae x + τ
    std::vector<double> hv_;   // hull values
    std::vector<std::size_t> hk_;
};

// λ⁺(x) = max{x_lo, max_{x' <= x} λ(x')}.  Output class Λ0.
[[nodiscard]] LossFunction regularize_plus(const LossFunction& raw, double tau);

struct SmoothingResult {
    LossFunction lam;
    double sup_distance = 0.0;  // sup_knots |λ_n - λ|
    double constant = 0.0;      // C with sup_distance = C / n
    bool slope_floor_active = false;  // λ_n' was floored at 0 somewhere
};

// λ_n'(x) = -x/n + n ∫_[x, x+1/n] λ',  λ_n(x_lo) = x_lo, with λ extended
// linearly beyond x_hi by its last slope.  Integrated exactly for piecewise
// linear λ.  Where the formula would make λ_n decrease (flat parts of λ with
// slope below x/n) the derivative is floored at 0 so the output stays in Λ.
[[nodiscard]] SmoothingResult smooth_loss(const LossFunction& lam, int n, double tau);

}  // namespace tightmech
