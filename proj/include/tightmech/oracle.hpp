// SPDX-License-Identifier: MIT
//
// Independent reference implementations used to validate the production
// solver: a brute-force per-type maximisation over effort (and optionally
// refund) grids, and a clause-by-clause structural verifier for tight
// mechanisms.
#pragma once

#include "tightmech/loss.hpp"
#include "tightmech/mechanism.hpp"
#include "tightmech/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace tightmech {

enum class RefundMode { Canonical, RefundGrid };

struct OracleConfig {
    std::size_t grid_eA = 401;
    std::size_t grid_eP = 401;
    RefundMode refunds = RefundMode::Canonical;
    std::size_t refund_grid = 201;  // per refund, RefundGrid mode only
    double tol = 1e-9;
    int zoom_levels = 1;  // refined re-enumerations around the incumbent
};

struct BruteForceResult {
    double e_A = 0.0;
    double e_P = 0.0;
    double r_A = 0.0;
    double r_P = 0.0;
    double r_empty = 0.0;
    double profit = 0.0;
    std::size_t survivors = 0;
};

// Maximises the type-y profit over grid tuples subject to the on-path loss
// bound, the deviation bound at every knot x >= y (and at y itself) and the
// obedience condition with refunds in [0, y + τ].  InfeasibleAtType if no
// tuple survives.
[[nodiscard]] BruteForceResult brute_force_type(const Environment& env, const LossFunction& lam, double y,
                                                OracleConfig cfg = {});

struct ClauseResult {
    std::string id;
    std::string description;
    bool pass = true;
    std::string detail;  // worst offending knot(s), empty on pass
};

struct CharacterizationReport {
    bool random_audits = false;
    std::string note;
    std::vector<ClauseResult> clauses;
    [[nodiscard]] bool all_pass() const;
    [[nodiscard]] std::string to_text() const;
};

struct VerifyTolerances {
    double strict = 1e-9;      // minimum per-knot change for strict monotonicity of e_P
    double weak = 1e-9;        // slack for weak monotonicity and sign conditions
    double efficient = 1e-6;   // e_A = e_A^eff on I_M
    double binding = 1e-7;     // |U - (y - λ_m)| on the binding region
};

// Checks the structure of a tight mechanism: with random audits, every
// clause of the five-interval characterization; otherwise the
// debt-with-relief form.
[[nodiscard]] CharacterizationReport verify_characterization(const Environment& env, const LossFunction& lam,
                                                             const Mechanism& mech, VerifyTolerances tol = {});

}  // namespace tightmech
