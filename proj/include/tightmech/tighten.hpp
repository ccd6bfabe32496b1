// SPDX-License-Identifier: MIT
//
// Per-type reduced maximisation (regime profits π1, π2, π3 and their lower
// envelope), refund recovery, the three-step tightening algorithm, the
// five-interval classification and the debt-with-relief constructor.
#pragma once

#include "tightmech/loss.hpp"
#include "tightmech/mechanism.hpp"
#include "tightmech/model.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace tightmech {

enum class Regime { R1, R2, R3 };

struct PiValues {
    double pi1 = 0.0;
    double pi2 = 0.0;
    double pi3 = 0.0;
    double envelope = 0.0;
};

struct ReducedSolution {
    double y = 0.0;
    double e_A_star = 0.0;
    double e_P_star = 0.0;
    double profit = 0.0;
    Regime regime = Regime::R1;
    double d1 = 0.0;  // y - u_A - λ(y)
    double d2 = 0.0;  // (1 - α) y - u_A - λ(y) - α τ
    double alpha = 0.0;
    double beta = 0.0;
};

struct SolveOptions {
    double width = 1e-10;        // golden-section bracket width
    int scan_points = 101;       // coarse unimodality scan
    double unimodal_tol = 1e-9;  // tolerated non-monotonicity on the scan
    unsigned jobs = 1;           // worker threads across knots
};

// Reusable per-λ solver: precomputes α at every knot and the ratio hull for β.
class TypeSolver {
public:
    TypeSolver(const Environment& env, const LossFunction& lam, SolveOptions opts = {});

    [[nodiscard]] PiValues pi(std::size_t knot, double e_A) const;
    [[nodiscard]] double alpha_at(std::size_t knot) const { return alpha_[knot]; }
    [[nodiscard]] double beta_at(std::size_t knot, double e_A) const;
    // Maximises the envelope at a knot; `hint` is an extra candidate effort
    // kept if it beats the golden-section result.
    [[nodiscard]] ReducedSolution solve(std::size_t knot, std::optional<double> hint = {}) const;
    // Same at an arbitrary type in the grid span.
    [[nodiscard]] ReducedSolution solve_at(double y, std::optional<double> hint = {}) const;

    [[nodiscard]] const LossFunction& loss() const noexcept { return lam_; }
    [[nodiscard]] const Environment& env() const noexcept { return env_; }

private:
    [[nodiscard]] PiValues pi_raw(double y, double ly, double a, double e_A) const;
    [[nodiscard]] double refine(double y, double ly, double a, double e) const;
    [[nodiscard]] ReducedSolution solve_raw(double y, double ly, double a, std::optional<double> hint,
                                            std::size_t knot) const;

    Environment env_;
    LossFunction lam_;
    SolveOptions opts_;
    std::vector<double> alpha_;
    RatioMaximizer ratio_;
};

[[nodiscard]] PiValues pi_values(const Environment& env, const LossFunction& lam, double y, double e_A);
[[nodiscard]] ReducedSolution solve_type(const Environment& env, const LossFunction& lam, double y,
                                         SolveOptions opts = {});

struct Refunds {
    double r_A = 0.0;
    double r_P = 0.0;
    double r_empty = 0.0;
};

// Canonical refunds for a reduced solution:
//   (1 - e_P)(y - r_empty) = min{(1 - e_P) y, λ(y) + u_A + e_P τ}
//   e_P (y - r_P) = min{y, λ(y) + u_A} - (1 - e_P)(y - r_empty)
//   r_A = c_A'(e_A) + e_P r_P + (1 - e_P) r_empty
// with never-paid refunds set to zero.  Throws InvariantViolation if a refund
// leaves [-1e-9, y + τ + 1e-9]; values are then clamped into [0, y + τ].
[[nodiscard]] Refunds recover_refunds(const Environment& env, const LossFunction& lam, const ReducedSolution& sol);

// T(λ) on every knot of λ's grid.  Optional hints are per-knot candidate efforts.
[[nodiscard]] Mechanism solve_tight(const Environment& env, const LossFunction& lam, SolveOptions opts = {},
                                    const std::vector<double>* hints = nullptr);

// λ̃(x) = min_y e_P(y) x + min{(1 - e_P(y)) y, λ⁺(y) + u_A(e_A(y)) + e_P(y) τ};
// certified in Λ (tolerance 1e-9), else InvariantViolation.
[[nodiscard]] LossFunction virtual_loss(const Environment& env, const Mechanism& mech, const LossFunction& lam_plus);

struct TightenResult {
    Mechanism mech;
    LossFunction lam_plus;
    LossFunction lam_tilde;
    std::vector<std::string> warnings;
};

// regularize_plus -> virtual_loss -> solve_tight.  The input must be feasible
// (InvariantViolation otherwise); tolerance-level IC violations only warn.
[[nodiscard]] TightenResult tighten(const Environment& env, const Mechanism& mech, SolveOptions opts = {});

enum class Region { EpOne, SL, L, M, H, SH, EpZero };
[[nodiscard]] std::string to_string(Region r);

struct IntervalBounds {
    bool empty = true;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t first = 0;
    std::size_t last = 0;
    [[nodiscard]] std::size_t count() const { return empty ? 0 : last - first + 1; }
};

struct IntervalPartition {
    std::vector<Region> labels;
    std::vector<double> d1;
    std::vector<double> d2;
    std::array<IntervalBounds, 5> intervals;  // SL, L, M, H, SH
    IntervalBounds ep_one;
    IntervalBounds ep_zero;
    std::size_t relabeled = 0;  // knots moved by the consecutiveness post-pass
    [[nodiscard]] const IntervalBounds& operator[](Region r) const;
    [[nodiscard]] bool random_audits() const;  // some knot has e_P in (0,1)
};

// Labels knots with e_P in (0,1) by the signs of (d1, d2) with equality band
// `band`, then enforces consecutive ordered runs; isolated out-of-order knots
// are relabelled, anything worse throws ClassificationAmbiguity.
[[nodiscard]] IntervalPartition classify(const Environment& env, const LossFunction& lam, const Mechanism& mech,
                                         double band = 1e-6);

// ē_A = argmin e c_A'(e) + (1 - e) c_P(1) by golden section.
[[nodiscard]] double debt_relief_effort(const Environment& env);
// e_P = 1(y < y0), r_P = 0, r_empty = max{y - y0, 0}, r_A = c_A'(ē_A) 1(y < y0),
// e_A = ē_A 1(y < y0).
[[nodiscard]] Mechanism debt_with_relief(const Environment& env, const std::vector<double>& grid, double y0);

}  // namespace tightmech
