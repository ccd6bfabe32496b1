// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "support.hpp"

using namespace tightmech;
using namespace tightmech::testing;
using doctest::Approx;

TEST_SUITE("optimality") {
    TEST_CASE("binding ICs of a debt-like loss") {
        const Environment env = Environment::figure1();
        const LossFunction lam = min_loss(env, 201, 0.5);
        const Mechanism m = solve_tight(env, lam);
        const auto b = binding_ics(env, lam, m);
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m.y[i] < 0.5 - 1e-12) {
                // e_P = 1: the line x -> x touches λ on [y, y0].
                CHECK(b.contact_lo[i] == Approx(m.y[i]));
                CHECK(b.contact_hi[i] == Approx(0.5));
            } else if (m.y[i] > 0.5 + 1e-12) {
                // Top region: the flat line equals max λ on [y, x_hi].
                CHECK(m.e_P[i] == 0.0);
                CHECK(b.contact_lo[i] == Approx(m.y[i]));
                CHECK(b.contact_hi[i] == Approx(1.0));
            }
        }
        CHECK_FALSE(b.wide_contacts.empty());
    }

    TEST_CASE("pointwise impacts on the Figure-1 tight mechanism") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 501);
        const Mechanism m = solve_tight(env, lam);
        const auto F = TypeDistribution::uniform(m.y);
        const auto rep = foc_residuals(env, lam, m, F);
        CHECK(rep.residual_SL <= 1e-6);  // D = -1 on I_SL
        CHECK(rep.residual_M <= 1e-6);   // D = 0 on I_M
        CHECK(rep.residual_SH <= 1e-5);  // D = I on I_SH
        CHECK(rep.integral_intervals >= 50);
        const auto& M = rep.part[Region::M];
        for (std::size_t i = M.first; i <= M.last; ++i) CHECK(std::abs(rep.imp.D[i]) <= 1e-6);
    }

    TEST_CASE("impacts reject zero agent effort under random audits") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 201);
        Mechanism m = solve_tight(env, lam);
        const auto part = classify(env, lam, m);
        const auto b = binding_ics(env, lam, m);
        m.e_A[part[Region::M].first] = 0.0;
        CHECK_THROWS_AS((void)impacts(env, m, part, b.selection), DomainError);
    }

    TEST_CASE("expected profit of reference mechanisms") {
        const Environment env = Environment::figure1();
        const auto g = type_grid(env, 501);
        const auto F = TypeDistribution::uniform(g);
        // ∫ (x - c_P(1)) dx = 0.5 - 1/1.01.
        CHECK(expected_profit(env, full_audit(g), F) == Approx(0.5 - 1.0 / 1.01).epsilon(1e-12));
        // ∫_0^0.5 (x - k) dx + 0.5 * 0.5 with k = 0.6802352 is 0.0348824; the
        // trapezoid rule smears the jump at y0 by half a cell.
        CHECK(std::abs(expected_profit(env, debt_with_relief(env, g, 0.5), F) - 0.0348824) <= 1e-3);
    }

    TEST_CASE("slope parameterisation stays inside the concave class") {
        const Environment env = Environment::figure1();
        std::mt19937_64 rng(5);
        std::normal_distribution<double> N(0.0, 3.0);
        for (int t = 0; t < 20; ++t) {
            std::vector<double> z(12);
            for (double& v : z) v = N(rng);
            const auto s = slopes_from_params(z);
            for (std::size_t j = 0; j < s.size(); ++j) {
                CHECK(s[j] > 0.0);
                CHECK(s[j] < 1.0);
                if (j) CHECK(s[j] <= s[j - 1]);
            }
            // The inverse clamps slopes and slope ratios 1e-6 away from {0, 1}.
            const auto back = slopes_from_params(params_from_slopes(s));
            CHECK(sup_distance(back, s) <= 1e-6);
            const LossFunction lam = loss_from_slopes(env, s, type_grid(env, 101));
            CHECK(lam.cls() == LossClass::Lambda);
            CHECK(lam.at(0) == 0.0);
        }
    }

    TEST_CASE("interior effort checks") {
        const Environment env = Environment::figure1();
        const Mechanism m = solve_tight(env, exp_loss(env, 201));
        const auto c = interior_effort_checks(env, m);
        CHECK(c.min_U > 0.0);
        CHECK(c.max_eP < 1.0);
        CHECK(c.min_eP_interior > 0.0);
    }

    TEST_CASE("best debt benchmark") {
        const Environment env = Environment::figure1();
        const auto F = TypeDistribution::uniform(type_grid(env, 501));
        const auto d = best_debt(env, F);
        // Continuous optimum over the 0.05 grid: y0 = 0.3 with profit 0.0509;
        // the trapezoid rule on 501 knots loses about h/2 times the jump.
        CHECK(d.y0_best == Approx(0.3));
        CHECK(std::abs(d.profit - 0.0509) <= 1e-3);
    }

    TEST_CASE("outer search: degenerate, budget-limited and monotone in budget") {
        const Environment env = Environment::figure1();
        const auto F = TypeDistribution::uniform(type_grid(env, 101));
        OptimizeOptions o;
        o.grid = 101;
        o.knots = 1;
        o.budget = 60;
        o.restarts = 3;
        const auto r1 = optimize_loss(env, F, o);
        CHECK(std::isfinite(r1.expected_profit));
        CHECK(check_incentives(env, r1.mech).ok());

        o.knots = 4;
        o.budget = 5;
        CHECK_THROWS_AS((void)optimize_loss(env, F, o), BudgetExhausted);
        try {
            (void)optimize_loss(env, F, o);
        } catch (const BudgetExhausted& e) {
            CHECK(std::isfinite(e.best().expected_profit));
            CHECK(e.best().evaluations <= 5);
        }

        double prev = -1e9;
        for (std::size_t budget : {40, 80, 160}) {
            o.budget = budget;
            const auto r = optimize_loss(env, F, o);
            CHECK(r.evaluations <= budget);
            CHECK(r.expected_profit >= prev - 1e-12);
            prev = r.expected_profit;
        }
    }
}
