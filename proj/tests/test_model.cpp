// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "support.hpp"

using namespace tightmech;
using doctest::Approx;

TEST_SUITE("model") {
    TEST_CASE("evidence rent matches independent quadrature values") {
        const Environment env = Environment::figure1();
        // u_A(e) = e c_A'(e) - c_A(e), evaluated in closed form offline.
        CHECK(evidence_rent(env, 0.0) == 0.0);
        CHECK(evidence_rent(env, 0.5) == Approx(0.1022180190).epsilon(1e-9));
        CHECK(evidence_rent(env, 1.0) == Approx(0.5819767069).epsilon(1e-9));
        CHECK_THROWS_AS((void)evidence_rent(env, 1.5), DomainError);
        CHECK_THROWS_AS((void)evidence_rent(env, -0.1), DomainError);
    }

    TEST_CASE("integration-by-parts identity u_A(e) = int_0^e s c_A''(s) ds") {
        const Environment env = Environment::figure1();
        for (double e : {0.1, 0.3, 0.7, 1.0}) {
            const int n = 20000;
            double q = 0.0;
            for (int k = 0; k < n; ++k) {
                const double s0 = e * k / n, s1 = e * (k + 1) / n;
                q += 0.5 * (s0 * env.c_A.d2(s0) + s1 * env.c_A.d2(s1)) * (s1 - s0);
            }
            CHECK(std::abs(q - evidence_rent(env, e)) <= 1e-7);
        }
    }

    TEST_CASE("analytic derivatives agree with central differences") {
        const Environment env = Environment::figure1();
        const std::vector<CostFunction> costs = {env.c_A, env.c_P_base, CostFunction::power(2.0, 3.0),
                                                 CostFunction::power(3.5)};
        for (const auto& c : costs) {
            for (int k = 1; k <= 50; ++k) {
                const double e = 0.02 + 0.96 * (k - 1) / 49.0;
                const double h = 1e-5;
                for (int order = 1; order <= 2; ++order) {
                    const double fd = (c.derivative(order - 1, e + h) - c.derivative(order - 1, e - h)) / (2 * h);
                    const double an = c.derivative(order, e);
                    CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
                }
            }
        }
    }

    TEST_CASE("efficient effort solves c_A'(e) = c_P(e_P)") {
        const Environment env = Environment::figure1();
        // Root-finding oracle: c_A'(e) = c_P(0.5) ~ 0.49161.
        const double e5 = efficient_effort(env, 0.5);
        CHECK(e5 == Approx(0.6123485).epsilon(1e-6));
        CHECK(std::abs(env.c_A.d1(e5) - env.cP(0.5)) <= 1e-9);
        const double e1 = efficient_effort(env, 1.0);
        CHECK(e1 == Approx(0.99372).epsilon(1e-5));
        CHECK(std::abs(env.c_A.d1(e1) - 1.0 / 1.01) <= 1e-9);
        CHECK(efficient_effort(env, 0.0) == 0.0);
        double prev = -1.0;
        for (int k = 0; k <= 20; ++k) {
            const double e = efficient_effort(env, k / 20.0);
            CHECK(e >= prev);
            prev = e;
        }
    }

    TEST_CASE("efficient effort agrees with grid minimisation") {
        const Environment env = Environment::figure1();
        for (double p : {0.2, 0.5, 0.9}) {
            double best = 1e9, arg = 0.0;
            for (int k = 0; k <= 10000; ++k) {
                const double e = k / 10000.0;
                const double v = env.c_A.value(e) + (1 - e) * env.cP(p);
                if (v < best) best = v, arg = e;
            }
            CHECK(std::abs(efficient_effort(env, p) - arg) <= 2e-4);
        }
    }

    TEST_CASE("assumption checkers") {
        const Environment fig = Environment::figure1();
        const auto rep = check_assumptions(fig);
        CHECK(rep.budget);
        CHECK(rep.regularity);
        CHECK(rep.rent_regularity);
        CHECK_FALSE(rep.approximate);

        const Environment poor = Environment::make(0, 1, 0.5, fig.c_A, fig.c_P_base, 1.0, false);
        const auto r2 = check_assumptions(poor);
        CHECK_FALSE(r2.budget);
        CHECK(r2.budget_witness.find("tau") != std::string::npos);

        // Quadratic costs, tau = 10: c_A''' = 0 so the regularity slack is
        // (x_lo + tau)/c_P'(1) + e - (1 - e) = 10 + 2e - 1 > 0.
        const Environment quad = Environment::make(0, 1, 10, CostFunction::power(2, 1), CostFunction::power(2, 1), 1.0, false);
        const auto r3 = check_assumptions(quad);
        CHECK(r3.regularity);
        CHECK(r3.regularity_min_slack > 0.0);

        const Environment linear = Environment::make(0, 1, 1, CostFunction::power(1, 1), fig.c_P_base, 1.0, false);
        const auto r4 = check_assumptions(linear);
        CHECK_FALSE(r4.rent_regularity);
        REQUIRE(r4.rent_regularity_witness.has_value());
        CHECK(*r4.rent_regularity_witness == 0.0);
        CHECK_THROWS_AS((void)Environment::make(0, 1, 0.5, fig.c_A, fig.c_P_base), InvariantViolation);
    }

    TEST_CASE("tabulated costs are flagged approximate") {
        std::vector<double> nodes, values;
        for (int k = 0; k <= 40; ++k) {
            const double e = k / 40.0;
            nodes.push_back(e);
            values.push_back((std::exp(e) - e - 1) / (std::exp(1.0) - 1));
        }
        const CostFunction t = CostFunction::tabulated(nodes, values);
        CHECK(t.approximate());
        CHECK(t.value(0.5) == Approx(Environment::figure1().c_A.value(0.5)).epsilon(1e-4));
        const Environment env = Environment::make(0, 1, 1, t, CostFunction::power(1.01), 1.0, false);
        CHECK(check_assumptions(env).approximate);
        CHECK_THROWS_AS((void)CostFunction::tabulated({0.0, 1.0}, {0.0, 1.0}), DomainError);
    }

    TEST_CASE("global concavity scan reports the e_A = 0 row") {
        const Environment env = Environment::figure1();
        const auto rep = check_global_concavity(env, 0.553, 7);
        CHECK(rep.points > 0);
        // -(u_A'' + c_A'') < 0 at e_A = 0 reduces to c_A''(0) > 0.
        CHECK(rep.min_ee_at_zero > 0.0);
    }

    TEST_CASE("type distributions integrate to one") {
        const auto g = type_grid(Environment::figure1(), 201);
        for (const auto& F : {TypeDistribution::uniform(g), TypeDistribution::truncated_exponential(g, 2.0)}) {
            double s = 0.0;
            for (double w : F.weights()) s += w;
            CHECK(s == Approx(1.0).epsilon(1e-12));
            CHECK(F.min_density() > 0.0);
        }
    }
}
