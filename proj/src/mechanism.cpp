// SPDX-License-Identifier: MIT
#include "tightmech/mechanism.hpp"

#include "tightmech/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tightmech {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::Raw: return "raw";
        case Provenance::Tightened: return "tightened";
        case Provenance::Constructed: return "constructed";
    }
    return "raw";
}

Mechanism Mechanism::zeros(const std::vector<double>& grid, Provenance p) {
    Mechanism m;
    const std::size_t n = grid.size();
    m.y = grid;
    m.e_A.assign(n, 0.0);
    m.e_P.assign(n, 0.0);
    m.r_A.assign(n, 0.0);
    m.r_P.assign(n, 0.0);
    m.r_empty.assign(n, 0.0);
    m.provenance = p;
    return m;
}

void Mechanism::normalize_never_paid() {
    for (std::size_t i = 0; i < size(); ++i) {
        if (e_P[i] == 0.0) r_P[i] = 0.0;
        if (e_P[i] == 1.0) r_empty[i] = 0.0;
    }
}

std::string Mechanism::feasibility_violation(double tau, double tol) const {
    const std::size_t n = size();
    if (e_A.size() != n || e_P.size() != n || r_A.size() != n || r_P.size() != n || r_empty.size() != n)
        return "schedules have inconsistent lengths";
    auto bad = [&](const char* name, std::size_t i, double v) {
        std::ostringstream os;
        os << name << " = " << v << " infeasible at knot " << i << " (y = " << y[i] << ")";
        return os.str();
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (!(e_A[i] >= 0.0 && e_A[i] <= 1.0)) return bad("e_A", i, e_A[i]);
        if (!(e_P[i] >= 0.0 && e_P[i] <= 1.0)) return bad("e_P", i, e_P[i]);
        const double hi = y[i] + tau + tol;
        if (!(r_A[i] >= -tol && r_A[i] <= hi)) return bad("r_A", i, r_A[i]);
        if (!(r_P[i] >= -tol && r_P[i] <= hi)) return bad("r_P", i, r_P[i]);
        if (!(r_empty[i] >= -tol && r_empty[i] <= hi)) return bad("r_empty", i, r_empty[i]);
    }
    return {};
}

Mechanism full_audit(const std::vector<double>& grid) {
    Mechanism m = Mechanism::zeros(grid, Provenance::Constructed);
    std::fill(m.e_P.begin(), m.e_P.end(), 1.0);
    return m;
}

std::vector<double> no_evidence_refund(const Mechanism& mech) {
    std::vector<double> r(mech.size());
    for (std::size_t i = 0; i < mech.size(); ++i)
        r[i] = mech.e_P[i] * mech.r_P[i] + (1.0 - mech.e_P[i]) * mech.r_empty[i];
    return r;
}

std::vector<double> interim_utility(const Environment& env, const Mechanism& mech) {
    auto u = no_evidence_refund(mech);
    for (std::size_t i = 0; i < mech.size(); ++i) u[i] += evidence_rent(env, mech.e_A[i]);
    return u;
}

std::vector<double> profit(const Environment& env, const Mechanism& mech) {
    const auto R = no_evidence_refund(mech);
    std::vector<double> pi(mech.size());
    for (std::size_t i = 0; i < mech.size(); ++i) {
        const double e = mech.e_A[i];
        pi[i] = mech.y[i] - R[i] - evidence_rent(env, e) - env.c_A.value(e) - (1.0 - e) * env.cP(mech.e_P[i]);
    }
    return pi;
}

LossFunction induced_loss(const Environment& env, const Mechanism& mech) {
    const std::size_t n = mech.size();
    std::vector<double> slope(n);
    std::vector<double> icpt(n);
    for (std::size_t k = 0; k < n; ++k) {
        slope[k] = mech.e_P[k];
        icpt[k] = (1.0 - mech.e_P[k]) * (mech.y[k] - mech.r_empty[k]);
    }
    std::vector<double> lam(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = mech.y[j];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= j; ++k) best = std::min(best, slope[k] * x + icpt[k]);
        lam[j] = best;
    }
    return LossFunction(mech.y, std::move(lam), LossClass::Lambda0, env.tau, 1e-9);
}

DerivedSchedules derive(const Environment& env, const Mechanism& mech) {
    DerivedSchedules d;
    d.R_NA = no_evidence_refund(mech);
    d.U = interim_utility(env, mech);
    d.Pi = profit(env, mech);
    d.lambda_m = induced_loss(env, mech).values();
    return d;
}

IncentiveReport check_incentives(const Environment& env, const Mechanism& mech, IncentiveTolerances tol) {
    IncentiveReport rep;
    const auto U = interim_utility(env, mech);
    const auto lam = induced_loss(env, mech);
    const auto R = no_evidence_refund(mech);
    const double cA1 = env.c_A.d1(1.0);
    rep.worst_ic_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mech.size(); ++i) {
        const double slack = U[i] - (mech.y[i] - lam.at(i));
        rep.worst_ic_slack = std::min(rep.worst_ic_slack, slack);
        if (slack < -tol.money) {
            rep.ic_ok = false;
            rep.ic_violations.push_back(i);
        }
        const double e = mech.e_A[i];
        const double b = mech.r_A[i] - R[i];
        double resid = std::max(0.0, b - cA1);  // no strict incentive for certain evidence
        if (e <= 0.0)
            resid = std::max(resid, b);
        else if (e >= 1.0)
            resid = std::max(resid, cA1 - b);
        else
            resid = std::max(resid, std::abs(env.c_A.d1(e) - b));
        rep.worst_obedience_residual = std::max(rep.worst_obedience_residual, resid);
        if (resid > tol.foc) {
            rep.obedience_ok = false;
            rep.obedience_violations.push_back(i);
        }
    }
    return rep;
}

}  // namespace tightmech
