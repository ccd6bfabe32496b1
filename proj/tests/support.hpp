// SPDX-License-Identifier: MIT
//
// Shared fixtures for the unit and acceptance tests.
#pragma once

#include "tightmech/errors.hpp"
#include "tightmech/loss.hpp"
#include "tightmech/mechanism.hpp"
#include "tightmech/model.hpp"
#include "tightmech/optimality.hpp"
#include "tightmech/tighten.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#ifndef TIGHTMECH_FIXTURES
#define TIGHTMECH_FIXTURES "tests/fixtures"
#endif

namespace tightmech::testing {

inline std::string fixture(const std::string& name) { return std::string(TIGHTMECH_FIXTURES) + "/" + name; }

// λ(x) = 1 - exp(-x) on [0,1], the Figure-1 loss.
inline LossFunction exp_loss(const Environment& env, std::size_t n) {
    return LossFunction::from_function(type_grid(env, n), [](double x) { return 1.0 - std::exp(-x); },
                                       LossClass::Lambda, env.tau);
}

inline LossFunction min_loss(const Environment& env, std::size_t n, double y0) {
    return LossFunction::from_function(type_grid(env, n), [y0](double x) { return std::min(x, y0); },
                                       LossClass::Lambda, env.tau);
}

inline double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Random member of Λ: `segments` nonincreasing slopes in (0,1).
inline LossFunction random_loss(const Environment& env, std::size_t n, std::mt19937_64& rng, std::size_t segments = 8) {
    std::normal_distribution<double> z0(1.5, 1.5);
    std::normal_distribution<double> z(2.5, 2.0);
    std::vector<double> params(segments);
    params[0] = z0(rng);
    for (std::size_t j = 1; j < segments; ++j) params[j] = z(rng);
    return loss_from_slopes(env, slopes_from_params(params), type_grid(env, n));
}

// Random feasible IC mechanism: for a random λ ∈ Λ draw e_A and an audit
// probability e_P >= max{α, β(e_A)} (so every deviation line stays above λ),
// then set the canonical refunds.  Such a mechanism is feasible and IC but in
// general not tight.
inline Mechanism random_ic_mechanism(const Environment& env, std::size_t n, std::mt19937_64& rng) {
    const LossFunction lam = random_loss(env, n, rng);
    const TypeSolver ts(env, lam);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Mechanism m = Mechanism::zeros(lam.grid(), Provenance::Raw);
    for (std::size_t i = 0; i < n; ++i) {
        ReducedSolution s;
        s.y = lam.grid()[i];
        for (int attempt = 0;; ++attempt) {
            s.e_A_star = 0.9 * U(rng);
            const double floor = std::max(ts.alpha_at(i), ts.beta_at(i, s.e_A_star));
            s.e_P_star = attempt < 20 ? std::min(1.0, floor + (1.0 - floor) * 0.5 * U(rng)) : 1.0;
            try {
                const Refunds r = recover_refunds(env, lam, s);
                m.e_A[i] = s.e_A_star;
                m.e_P[i] = s.e_P_star;
                m.r_A[i] = r.r_A;
                m.r_P[i] = r.r_P;
                m.r_empty[i] = r.r_empty;
                break;
            } catch (const InvariantViolation&) {
                if (attempt >= 20) throw;
            }
        }
    }
    m.normalize_never_paid();
    return m;
}

}  // namespace tightmech::testing
