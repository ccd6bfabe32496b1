// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "support.hpp"
#include "tightmech/io.hpp"
#include "tightmech/oracle.hpp"

using namespace tightmech;
using namespace tightmech::testing;
using doctest::Approx;

TEST_SUITE("oracle") {
    TEST_CASE("enumeration reproduces closed forms") {
        const Environment env = Environment::figure1();
        // At or above the face value the type pays y0 and nothing is audited.
        const auto top = brute_force_type(env, min_loss(env, 201, 0.5), 0.7);
        CHECK(top.profit == Approx(0.5).epsilon(1e-9));
        CHECK(top.e_P == 0.0);
        // λ = id: the bottom type is audited for sure; profit = -k.
        const auto id = LossFunction::from_function(type_grid(env, 201), [](double x) { return x; }, LossClass::Lambda,
                                                    env.tau);
        const auto b = brute_force_type(env, id, 0.0);
        CHECK(b.e_P == 1.0);
        CHECK(b.profit == Approx(-0.6802352).epsilon(1e-6));
    }

    TEST_CASE("solver and oracle agree on random (lambda, y)") {
        const Environment env = Environment::figure1();
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int t = 0; t < 4; ++t) {
            const LossFunction lam = random_loss(env, 201, rng);
            const double y = U(rng);
            const auto s = solve_type(env, lam, y);
            const auto b = brute_force_type(env, lam, y);
            CHECK(s.profit - b.profit >= -1e-4);
            CHECK(s.profit - b.profit <= 1e-4);
            CHECK(std::abs(s.e_P_star - b.e_P) <= 2.0 / 401.0);
        }
    }

    TEST_CASE("refund-grid mode agrees with canonical refunds up to the refund resolution") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 201);
        for (double y : {0.1, 0.45, 0.8}) {
            OracleConfig can;
            can.grid_eA = can.grid_eP = 101;
            can.zoom_levels = 0;
            OracleConfig grid = can;
            grid.refunds = RefundMode::RefundGrid;
            grid.refund_grid = 101;
            const auto a = brute_force_type(env, lam, y, can);
            const auto g = brute_force_type(env, lam, y, grid);
            const double h = (y + env.tau) / 100.0;
            CHECK(g.profit <= a.profit + 1e-9);
            CHECK(a.profit - g.profit <= h);
        }
    }

    TEST_CASE("configuration and domain errors") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 51);
        OracleConfig bad;
        bad.grid_eA = 5;
        CHECK_THROWS_AS((void)brute_force_type(env, lam, 0.5, bad), DomainError);
        CHECK_THROWS_AS((void)brute_force_type(env, lam, 1.5), DomainError);
    }

    TEST_CASE("structural verifier") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 501);
        const auto good = verify_characterization(env, lam, solve_tight(env, lam));
        CHECK(good.random_audits);
        CHECK(good.all_pass());
        for (const auto& c : good.clauses) CHECK_MESSAGE(c.pass, c.id << ": " << c.detail);

        // Swap e_A at two knots inside I_M.
        Mechanism bad = load_mechanism(fixture("figure1_tight_501.csv"));
        std::swap(bad.e_A[240], bad.e_A[260]);
        const auto rep = verify_characterization(env, lam, bad);
        CHECK_FALSE(rep.all_pass());
        bool found = false;
        for (const auto& c : rep.clauses)
            if (c.id == "2b") {
                found = true;
                CHECK_FALSE(c.pass);
                CHECK(c.detail.find("knots 240,241") != std::string::npos);
            }
        CHECK(found);

        const auto g = type_grid(env, 201);
        const Mechanism d = debt_with_relief(env, g, 0.5);
        const auto dr = verify_characterization(env, min_loss(env, 201, 0.5), d);
        CHECK_FALSE(dr.random_audits);
        CHECK(dr.all_pass());
        CHECK(dr.note.find("vacuous") != std::string::npos);
    }
}
