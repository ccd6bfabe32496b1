// SPDX-License-Identifier: MIT
//
// Binding incentive constraints, the direct and indirect impacts of the
// audit-the-poor-or-burden-the-rich perturbation, first-order-condition
// residuals, expected profit and the outer search over loss functions.
#pragma once

#include "tightmech/loss.hpp"
#include "tightmech/mechanism.hpp"
#include "tightmech/model.hpp"
#include "tightmech/tighten.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tightmech {

struct BindingICReport {
    // Contact set of λ with type y's deviation line, as knot values.
    std::vector<double> contact_lo;
    std::vector<double> contact_hi;
    // Selection x̂(y): sub-knot position of the contact point obtained by
    // matching the line's slope against λ's one-sided slopes; NaN where the
    // line does not touch λ on [y, x̄] beyond the band.
    std::vector<double> selection;
    // Knots whose contact set is wider than two adjacent knots.
    std::vector<std::size_t> wide_contacts;
    bool doubly_unique = false;
    bool monotone = false;  // selection strictly increasing over random-audit knots
    double band = 0.0;
};

// Contact sets by maximising λ(x) - e_P(y) x over knots x >= y with
// equality band 1e-8 (1 + x̄).
[[nodiscard]] BindingICReport binding_ics(const Environment& env, const LossFunction& lam, const Mechanism& mech);

struct Impacts {
    std::vector<double> D;  // NaN where e_A = 0 outside the random-audit region
    std::vector<double> I;  // NaN outside the five intervals
};

// D = (c_A'(e_A) - c_P(e_P)) / u_A'(e_A); I by interval:
//   I_SL ∪ I_L ∪ I_M: (1 - e_A) c_P'(e_P) / (x̂ - y)
//   I_H:              the same minus ((y + τ)/(x̂ - y)) D
//   I_SH:             (1 - e_A) c_P'(e_P) / (x̂ + τ)
// DomainError if e_A = 0 at a knot with random audits.
[[nodiscard]] Impacts impacts(const Environment& env, const Mechanism& mech, const IntervalPartition& part,
                              const std::vector<double>& selection);

struct OptimalityReport {
    Impacts imp;
    std::vector<double> selection;
    IntervalPartition part;
    double residual_SL = 0.0;  // max |D + 1| on I_SL
    double residual_M = 0.0;   // max |D| on I_M
    double residual_SH = 0.0;  // max distance of D to the indirect impacts over the active ratio knots on I_SH
    double residual_SH_selection = 0.0;  // max |D - I| with the reported selection
    double integral_residual = 0.0;      // max over the subinterval family
    std::size_t integral_intervals = 0;
    double expected_profit = 0.0;
    double sup_SL = 0.0;
    double inf_selection = 0.0;
    bool boundary_flag = false;  // |inf x̂ - sup I_SL| exceeds one grid step
    bool selection_dependent = false;
};

// Evaluates the pointwise and integral first-order conditions.  The integral
// condition ∫_[a,b] I dF = ∫_[x̂(a), x̂(b)] (1 + D) dF is checked on `random`
// seeded subintervals plus dyadic subintervals of the random-audit region.
[[nodiscard]] OptimalityReport foc_residuals(const Environment& env, const LossFunction& lam, const Mechanism& mech,
                                             const TypeDistribution& F, std::uint64_t seed = 0, int random = 50);

// Trapezoid quadrature of Π_m f on the mechanism grid.
[[nodiscard]] double expected_profit(const Environment& env, const Mechanism& mech, const TypeDistribution& F);

struct InteriorEffortChecks {
    double min_U = 0.0;
    double max_eP = 0.0;
    double min_eP_interior = 0.0;  // on [x̲, x̄ - grid step]
    [[nodiscard]] bool ok(double u_tol = 1e-4, double ep_hi = 1e-4, double ep_lo = 1e-5) const {
        return min_U >= u_tol && max_eP <= 1.0 - ep_hi && min_eP_interior >= ep_lo;
    }
};

[[nodiscard]] InteriorEffortChecks interior_effort_checks(const Environment& env, const Mechanism& mech);

// Slope parameterisation of Λ on `knots` equal segments: slopes
// s_1 = σ(z_1), s_{j+1} = s_j σ(z_{j+1}) lie in (0, 1) and are nonincreasing,
// so λ is increasing, concave, λ(x̲) = x̲ and λ <= id by construction.
[[nodiscard]] std::vector<double> slopes_from_params(const std::vector<double>& z);
[[nodiscard]] std::vector<double> params_from_slopes(const std::vector<double>& slopes);
[[nodiscard]] LossFunction loss_from_slopes(const Environment& env, const std::vector<double>& slopes,
                                            const std::vector<double>& grid);

struct OptimizeOptions {
    std::size_t knots = 16;
    std::size_t budget = 2000;  // inner solves (one tight solve per candidate λ)
    std::size_t restarts = 20;
    std::size_t grid = 501;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct OptimizeResult {
    std::vector<double> slopes;
    LossFunction lam;
    Mechanism mech;
    OptimalityReport report;
    double expected_profit = 0.0;
    std::size_t evaluations = 0;
    std::size_t converged_runs = 0;
};

// Thrown when the budget is too small to evaluate every starting point and
// form one simplex; carries the best candidate found so far.
class BudgetExhausted : public std::runtime_error {
public:
    BudgetExhausted(const std::string& what, std::shared_ptr<const OptimizeResult> best)
        : std::runtime_error(what), best_(std::move(best)) {}
    [[nodiscard]] const OptimizeResult& best() const { return *best_; }

private:
    std::shared_ptr<const OptimizeResult> best_;
};

// Maximises expected profit of T(λ) over the slope parameterisation with the
// Nelder–Mead simplex (seeded random restarts plus warm starts at the best
// debt contract's loss and the exponential loss 1 - exp(-(x - x̲))).
[[nodiscard]] OptimizeResult optimize_loss(const Environment& env, const TypeDistribution& F,
                                           OptimizeOptions opts = {});

struct DebtBenchmark {
    double y0_best = 0.0;
    double profit = 0.0;
};

// Best debt-with-relief face value over y0 ∈ {x̲, x̲ + step, ..., x̄}.
[[nodiscard]] DebtBenchmark best_debt(const Environment& env, const TypeDistribution& F, double step = 0.05);

}  // namespace tightmech
