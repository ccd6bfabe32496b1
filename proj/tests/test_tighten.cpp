// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "support.hpp"

using namespace tightmech;
using namespace tightmech::testing;
using doctest::Approx;

TEST_SUITE("tighten") {
    TEST_CASE("auxiliary profits compose alpha, beta and the rent") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 10001);
        // α(0.1) = 0.8129005, β(0.1, 0.3) = 0.2524459, u_A(0.3) = 0.0320662
        // from fine-grid ratio maximisation; π by direct evaluation.
        const PiValues p = pi_values(env, lam, 0.1, 0.3);
        CHECK(p.pi1 == Approx(-0.5233135).epsilon(1e-6));
        CHECK(p.pi2 == Approx(-0.4960847).epsilon(1e-6));
        CHECK(p.pi3 == Approx(-0.1064246).epsilon(1e-6));
        CHECK(p.envelope == std::min({p.pi1, p.pi2, p.pi3}));
    }

    TEST_CASE("at the top with e_A = 0 both binding profits equal lambda(y)") {
        const Environment env = Environment::figure1();
        const LossFunction lam = min_loss(env, 501, 0.6);
        const PiValues p = pi_values(env, lam, 0.8, 0.0);
        CHECK(p.pi2 == Approx(0.6));
        CHECK(p.pi3 == Approx(0.6));
    }

    TEST_CASE("relief effort and relief refund") {
        const Environment env = Environment::figure1();
        CHECK(debt_relief_effort(env) == Approx(0.553324).epsilon(2e-6));
        CHECK(env.c_A.d1(debt_relief_effort(env)) == Approx(0.4300947).epsilon(2e-6));
    }

    TEST_CASE("below the face value the per-type problem is the relief problem") {
        const Environment env = Environment::figure1();
        const LossFunction lam = min_loss(env, 501, 0.5);
        const auto s = solve_type(env, lam, 0.3);
        CHECK(s.e_A_star == Approx(0.553324).epsilon(1e-5));
        CHECK(s.e_P_star == 1.0);
        CHECK(s.profit == Approx(0.3 - 0.6802352).epsilon(1e-6));
        const Refunds r = recover_refunds(env, lam, s);
        CHECK(r.r_P == 0.0);
        CHECK(r.r_empty == 0.0);
        CHECK(r.r_A == Approx(env.c_A.d1(s.e_A_star)));
    }

    TEST_CASE("middle types pay e_P r_P = y - lambda - u_A with r_empty = 0") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 501);
        const Mechanism m = solve_tight(env, lam);
        const auto part = classify(env, lam, m);
        const auto& M = part[Region::M];
        REQUIRE_FALSE(M.empty);
        for (std::size_t i = M.first; i <= M.last; ++i) {
            CHECK(m.r_empty[i] == 0.0);
            CHECK(m.e_P[i] * m.r_P[i] ==
                  Approx(m.y[i] - lam.at(i) - evidence_rent(env, m.e_A[i])).epsilon(1e-9).scale(1.0));
        }
    }

    TEST_CASE("Figure-1 loss: five nonempty ordered intervals, e_P interior except at the top") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 501);
        const Mechanism m = solve_tight(env, lam);
        const auto part = classify(env, lam, m);
        double prev_hi = -1.0;
        for (const auto& b : part.intervals) {
            REQUIRE_FALSE(b.empty);
            CHECK(b.lo > prev_hi);
            prev_hi = b.hi;
        }
        CHECK(part.ep_one.empty);
        CHECK(m.e_P.back() == 0.0);
        CHECK(m.e_A.back() == 0.0);
        for (std::size_t i = 0; i + 1 < m.size(); ++i) CHECK((m.e_P[i] > 0.0 && m.e_P[i] < 1.0));
        CHECK(check_incentives(env, m).ok());
    }

    TEST_CASE("debt with relief has no random audits") {
        const Environment env = Environment::figure1();
        const auto g = type_grid(env, 201);
        const Mechanism d = debt_with_relief(env, g, 0.5);
        const auto part = classify(env, min_loss(env, 201, 0.5), d);
        CHECK_FALSE(part.random_audits());
        for (const auto& b : part.intervals) CHECK(b.empty);
        const Mechanism bottom = debt_with_relief(env, g, 0.0);
        for (double p : bottom.e_P) CHECK(p == 0.0);
    }

    TEST_CASE("virtual loss of reference mechanisms") {
        const Environment env = Environment::figure1();
        const auto g = type_grid(env, 201);
        const Mechanism fa = full_audit(g);
        const auto lt = virtual_loss(env, fa, regularize_plus(induced_loss(env, fa), env.tau));
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(lt.at(i) == Approx(g[i]).epsilon(1e-15));
        const Mechanism d = debt_with_relief(env, g, 0.5);
        const auto ld = virtual_loss(env, d, regularize_plus(induced_loss(env, d), env.tau));
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(ld.at(i) == Approx(std::min(g[i], 0.5)).epsilon(1e-12));
    }

    TEST_CASE("tightening improves profit and loss and is idempotent") {
        const Environment env = Environment::figure1();
        std::mt19937_64 rng(11);
        for (int t = 0; t < 3; ++t) {
            const Mechanism in = random_ic_mechanism(env, 101, rng);
            REQUIRE(check_incentives(env, in).ic_ok);
            const auto t1 = tighten(env, in);
            const auto pi0 = profit(env, in), pi1 = profit(env, t1.mech);
            const auto l0 = induced_loss(env, in), l1 = induced_loss(env, t1.mech);
            for (std::size_t i = 0; i < in.size(); ++i) {
                CHECK(pi1[i] >= pi0[i] - 1e-8);
                CHECK(l1.at(i) >= l0.at(i) - 1e-8);
            }
            const auto t2 = tighten(env, t1.mech);
            CHECK(sup_distance(t2.mech.e_A, t1.mech.e_A) <= 1e-7);
            CHECK(sup_distance(t2.mech.e_P, t1.mech.e_P) <= 1e-7);
            CHECK(sup_distance(profit(env, t2.mech), pi1) <= 1e-7);
            CHECK(sup_distance(t2.lam_tilde.values(), t1.lam_tilde.values()) <= 1e-7);
        }
    }

    TEST_CASE("tighten rejects infeasible input") {
        const Environment env = Environment::figure1();
        Mechanism m = full_audit(type_grid(env, 51));
        m.r_P[3] = 5.0;
        m.e_P[3] = 0.5;
        CHECK_THROWS_AS((void)tighten(env, m), InvariantViolation);
    }

    TEST_CASE("parallel solve is identical to the serial one") {
        const Environment env = Environment::figure1();
        const LossFunction lam = exp_loss(env, 301);
        SolveOptions par;
        par.jobs = 3;
        const Mechanism a = solve_tight(env, lam), b = solve_tight(env, lam, par);
        CHECK(a.e_A == b.e_A);
        CHECK(a.e_P == b.e_P);
        CHECK(a.r_A == b.r_A);
    }
}
