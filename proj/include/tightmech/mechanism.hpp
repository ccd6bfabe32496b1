// SPDX-License-Identifier: MIT
//
// Tax mechanisms on a type grid and the agent-side derived quantities:
// expected no-agent-evidence refund, interim utility, profit, induced loss
// function, and the feasibility / incentive / obedience checks.
#pragma once

#include "tightmech/loss.hpp"
#include "tightmech/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace tightmech {

enum class Provenance { Raw, Tightened, Constructed };

[[nodiscard]] std::string to_string(Provenance p);

struct Mechanism {
    std::vector<double> y;
    std::vector<double> e_A;
    std::vector<double> e_P;
    std::vector<double> r_A;
    std::vector<double> r_P;
    std::vector<double> r_empty;
    Provenance provenance = Provenance::Raw;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
    // Empty mechanism with zeroed schedules on the grid.
    static Mechanism zeros(const std::vector<double>& grid, Provenance p = Provenance::Raw);
    // Sets refunds that are never paid to zero: r_P where e_P = 0 and r_empty
    // where e_P = 1.
    void normalize_never_paid();
    // Empty string if efforts lie in [0,1] and refunds in [0, y + tau] (with
    // tolerance), else a description naming the first offending knot.
    [[nodiscard]] std::string feasibility_violation(double tau, double tol = 1e-9) const;
};

// The full-audit mechanism: e_P = 1, e_A = 0, all refunds 0.
[[nodiscard]] Mechanism full_audit(const std::vector<double>& grid);

struct DerivedSchedules {
    std::vector<double> R_NA;
    std::vector<double> U;
    std::vector<double> Pi;
    std::vector<double> lambda_m;
};

[[nodiscard]] std::vector<double> no_evidence_refund(const Mechanism& mech);
[[nodiscard]] std::vector<double> interim_utility(const Environment& env, const Mechanism& mech);
[[nodiscard]] std::vector<double> profit(const Environment& env, const Mechanism& mech);
// λ_m(x) = min over knots y <= x of e_P(y) x + (1 - e_P(y))(y - r_empty(y)).
// Tagged Λ0.
[[nodiscard]] LossFunction induced_loss(const Environment& env, const Mechanism& mech);
[[nodiscard]] DerivedSchedules derive(const Environment& env, const Mechanism& mech);

struct IncentiveTolerances {
    double money = 1e-9;  // IC slack
    double foc = 1e-7;    // obedience first-order condition
};

struct IncentiveReport {
    bool ic_ok = true;
    bool obedience_ok = true;
    double worst_ic_slack = 0.0;            // min_x U(x) - (x - λ_m(x))
    double worst_obedience_residual = 0.0;  // max violation of the effort optimality conditions
    std::vector<std::size_t> ic_violations;
    std::vector<std::size_t> obedience_violations;
    [[nodiscard]] bool ok() const { return ic_ok && obedience_ok; }
};

// IC: U(x) >= x - λ_m(x) - tol.money at all knots.
// Obedience: c_A'(e_A) = r_A - R_NA at interior e_A, r_A - R_NA <= tol at
// e_A = 0, r_A - R_NA >= c_A'(1) at e_A = 1, and r_A - R_NA <= c_A'(1)
// everywhere.
[[nodiscard]] IncentiveReport check_incentives(const Environment& env, const Mechanism& mech,
                                               IncentiveTolerances tol = {});

}  // namespace tightmech
