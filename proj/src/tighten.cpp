// SPDX-License-Identifier: MIT
#include "tightmech/tighten.hpp"

#include "numerics.hpp"
#include "tightmech/errors.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace tightmech {

TypeSolver::TypeSolver(const Environment& env, const LossFunction& lam, SolveOptions opts)
    : env_(env), lam_(lam), opts_(opts), alpha_(lam.size()), ratio_(lam, env.tau) {
    if (lam.cls() != LossClass::Lambda) throw DomainError("per-type solve needs a loss function in class Lambda");
    for (std::size_t i = 0; i < lam.size(); ++i) alpha_[i] = alpha(lam, lam.grid()[i]);
}

PiValues TypeSolver::pi_raw(double y, double ly, double a, double e_A) const {
    const double u = evidence_rent(env_, e_A);
    const double cA = env_.c_A.value(e_A);
    const double cpa = env_.cP(a);
    const double b = std::max(0.0, ratio_.query(ly + u).value);
    const double cpb = env_.cP(b);
    PiValues p;
    p.pi1 = y - u - cA - (1.0 - e_A) * cpa;
    p.pi2 = ly - cA - (1.0 - e_A) * cpa;
    p.pi3 = ly - cA - (1.0 - e_A) * cpb;
    p.envelope = std::min({p.pi1, p.pi2, p.pi3});
    return p;
}

double TypeSolver::refine(double y, double ly, double a, double e) const {
    // Golden section resolves the argmax only to about sqrt(machine epsilon)
    // because the envelope is flat there; when a single regime is active,
    // polish with a root of its first-order condition.
    if (e <= 0.0 || e >= 1.0) return e;
    // Boundary optima: the bracket stops a hair inside [0, 1].
    const double f_e = pi_raw(y, ly, a, e).envelope;
    if (e < 1e-6 && pi_raw(y, ly, a, 0.0).envelope >= f_e - 1e-15) return 0.0;
    if (e > 1.0 - 1e-6 && pi_raw(y, ly, a, 1.0).envelope >= f_e - 1e-15) return 1.0;
    const PiValues p = pi_raw(y, ly, a, e);
    std::array<double, 3> v{p.pi1, p.pi2, p.pi3};
    const auto active = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 3; ++j)
        if (j != active) gap = std::min(gap, v[j] - v[active]);
    if (gap < 1e-9) return e;
    const std::size_t z_knot = ratio_.query(ly + evidence_rent(env_, e)).knot;
    const double cpa = env_.cP(a);
    auto dpi = [&](double t) {
        const double cA1 = env_.c_A.d1(t);
        const double u1 = evidence_rent_derivative(env_, t);
        if (active == 0) return -u1 - cA1 + cpa;
        if (active == 1) return -cA1 + cpa;
        const double b = std::max(0.0, ratio_.query(ly + evidence_rent(env_, t)).value);
        const double zx = lam_.grid()[z_knot] + env_.tau;
        return -cA1 + env_.cP(b) + (b > 0.0 ? (1.0 - t) * env_.cP1(b) * u1 / zx : 0.0);
    };
    const double lo = std::max(0.0, e - 1e-6);
    const double hi = std::min(1.0, e + 1e-6);
    const double dlo = dpi(lo);
    const double dhi = dpi(hi);
    if (!(dlo > 0.0 && dhi < 0.0)) return e;
    if (active == 2 && (ratio_.query(ly + evidence_rent(env_, lo)).knot != z_knot ||
                        ratio_.query(ly + evidence_rent(env_, hi)).knot != z_knot))
        return e;
    std::uintmax_t iters = 100;
    const auto [r_lo, r_hi] = boost::math::tools::toms748_solve(dpi, lo, hi, dlo, dhi,
                                                               boost::math::tools::eps_tolerance<double>(52), iters);
    const double root = 0.5 * (r_lo + r_hi);
    const PiValues q = pi_raw(y, ly, a, root);
    std::array<double, 3> w{q.pi1, q.pi2, q.pi3};
    if (static_cast<std::size_t>(std::min_element(w.begin(), w.end()) - w.begin()) != active) return e;
    return q.envelope >= p.envelope - 1e-15 ? root : e;
}

PiValues TypeSolver::pi(std::size_t knot, double e_A) const {
    return pi_raw(lam_.grid()[knot], lam_.at(knot), alpha_[knot], e_A);
}

double TypeSolver::beta_at(std::size_t knot, double e_A) const {
    return std::max(0.0, ratio_.query(lam_.at(knot) + evidence_rent(env_, e_A)).value);
}

ReducedSolution TypeSolver::solve_raw(double y, double ly, double a, std::optional<double> hint,
                                      std::size_t knot) const {
    auto f = [&](double e) { return pi_raw(y, ly, a, e).envelope; };
    const int m = std::max(opts_.scan_points, 3);
    std::vector<double> vals(static_cast<std::size_t>(m));
    std::size_t best = 0;
    for (int j = 0; j < m; ++j) {
        vals[static_cast<std::size_t>(j)] = f(static_cast<double>(j) / (m - 1));
        if (vals[static_cast<std::size_t>(j)] > vals[best]) best = static_cast<std::size_t>(j);
    }
    // The envelope is strictly quasiconcave: rising up to the scan maximum,
    // falling afterwards.
    double scale = 1.0;
    for (double v : vals) scale = std::max(scale, std::abs(v));
    const double tol = opts_.unimodal_tol * scale;
    for (std::size_t j = 0; j + 1 < vals.size(); ++j) {
        const bool bad = j < best ? vals[j + 1] < vals[j] - tol : vals[j + 1] > vals[j] + tol;
        if (bad) {
            std::ostringstream os;
            os << "envelope not unimodal at y = " << y << " near e_A = " << static_cast<double>(j) / (m - 1);
            throw SolverFailure(os.str(), knot);
        }
    }
    const double step = 1.0 / (m - 1);
    const double lo = std::max(0.0, static_cast<double>(best) * step - step);
    const double hi = std::min(1.0, static_cast<double>(best) * step + step);
    auto [e_star, f_star] = detail::golden_section_max(f, lo, hi, opts_.width);
    e_star = refine(y, ly, a, e_star);
    f_star = f(e_star);
    if (hint && *hint >= 0.0 && *hint <= 1.0) {
        const double fh = f(*hint);
        if (fh > f_star) {
            e_star = *hint;
            f_star = fh;
        }
    }

    ReducedSolution s;
    s.y = y;
    s.e_A_star = e_star;
    const PiValues p = pi_raw(y, ly, a, e_star);
    const double u = evidence_rent(env_, e_star);
    s.alpha = a;
    s.beta = std::max(0.0, ratio_.query(ly + u).value);
    s.e_P_star = std::max(s.alpha, s.beta);
    s.profit = p.envelope;
    s.regime = Regime::R1;
    if (p.pi2 < p.pi1 && p.pi2 <= p.pi3) s.regime = Regime::R2;
    if (p.pi3 < p.pi1 && p.pi3 < p.pi2) s.regime = Regime::R3;
    s.d1 = y - u - ly;
    s.d2 = (1.0 - a) * y - u - ly - a * env_.tau;
    return s;
}

ReducedSolution TypeSolver::solve(std::size_t knot, std::optional<double> hint) const {
    return solve_raw(lam_.grid()[knot], lam_.at(knot), alpha_[knot], hint, knot);
}

ReducedSolution TypeSolver::solve_at(double y, std::optional<double> hint) const {
    const auto& g = lam_.grid();
    const std::size_t k = detail::segment_of(g, y);
    for (std::size_t c : {k, k + 1})
        if (g[c] == y) return solve(c, hint);
    return solve_raw(y, lam_(y), alpha(lam_, y), hint, k);
}

PiValues pi_values(const Environment& env, const LossFunction& lam, double y, double e_A) {
    const double a = alpha(lam, y);
    const double ly = lam(y);
    const double u = evidence_rent(env, e_A);
    const double cA = env.c_A.value(e_A);
    const double b = beta(env, lam, y, e_A);
    PiValues p;
    p.pi1 = y - u - cA - (1.0 - e_A) * env.cP(a);
    p.pi2 = ly - cA - (1.0 - e_A) * env.cP(a);
    p.pi3 = ly - cA - (1.0 - e_A) * env.cP(b);
    p.envelope = std::min({p.pi1, p.pi2, p.pi3});
    return p;
}

ReducedSolution solve_type(const Environment& env, const LossFunction& lam, double y, SolveOptions opts) {
    if (!(y >= lam.x_lo() && y <= lam.x_hi())) throw DomainError("type outside the loss grid span");
    return TypeSolver(env, lam, opts).solve_at(y);
}

Refunds recover_refunds(const Environment& env, const LossFunction& lam, const ReducedSolution& sol) {
    const double y = sol.y;
    const double eP = sol.e_P_star;
    const double eA = sol.e_A_star;
    const double ly = lam(y);
    const double u = evidence_rent(env, eA);
    Refunds r;
    // Branch-wise closed forms of the canonical equations; they avoid the
    // cancellation in y - B / e_P when e_P is small.
    const double s = ly + u;
    if (s + eP * env.tau >= (1.0 - eP) * y) {
        if (eP > 0.0) r.r_P = s >= y ? 0.0 : (y - s) / eP;
    } else {
        if (eP < 1.0) r.r_empty = y - (s + eP * env.tau) / (1.0 - eP);
        if (eP > 0.0) r.r_P = y + env.tau;
    }
    r.r_A = env.c_A.d1(eA) + eP * r.r_P + (1.0 - eP) * r.r_empty;
    const double hi = y + env.tau;
    for (auto [name, v] : {std::pair{"r_A", r.r_A}, std::pair{"r_P", r.r_P}, std::pair{"r_empty", r.r_empty}}) {
        if (!(v >= -1e-9 && v <= hi + 1e-9)) {
            std::ostringstream os;
            os << "recovered refund " << name << " = " << v << " outside [0, " << hi << "] at y = " << y;
            throw InvariantViolation(os.str());
        }
    }
    r.r_A = std::clamp(r.r_A, 0.0, hi);
    r.r_P = std::clamp(r.r_P, 0.0, hi);
    r.r_empty = std::clamp(r.r_empty, 0.0, hi);
    return r;
}

Mechanism solve_tight(const Environment& env, const LossFunction& lam, SolveOptions opts,
                      const std::vector<double>* hints) {
    const TypeSolver solver(env, lam, opts);
    Mechanism m = Mechanism::zeros(lam.grid(), Provenance::Tightened);
    const std::size_t n = lam.size();
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::optional<double> h;
            if (hints && i < hints->size()) h = (*hints)[i];
            const ReducedSolution s = solver.solve(i, h);
            const Refunds r = recover_refunds(env, lam, s);
            m.e_A[i] = s.e_A_star;
            m.e_P[i] = s.e_P_star;
            m.r_A[i] = r.r_A;
            m.r_P[i] = r.r_P;
            m.r_empty[i] = r.r_empty;
        }
    };
    const unsigned jobs = std::max(1u, opts.jobs);
    if (jobs == 1 || n < 2 * jobs) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(jobs);
        const std::size_t chunk = (n + jobs - 1) / jobs;
        for (unsigned t = 0; t < jobs; ++t) {
            pool.emplace_back([&, t] {
                try {
                    work(std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    m.normalize_never_paid();
    return m;
}

LossFunction virtual_loss(const Environment& env, const Mechanism& mech, const LossFunction& lam_plus) {
    const std::size_t n = mech.size();
    if (lam_plus.size() != n) throw DomainError("virtual_loss: mechanism and loss grids differ");
    std::vector<double> slope(n);
    std::vector<double> icpt(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double eP = mech.e_P[k];
        slope[k] = eP;
        icpt[k] = std::min((1.0 - eP) * mech.y[k], lam_plus.at(k) + evidence_rent(env, mech.e_A[k]) + eP * env.tau);
    }
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) best = std::min(best, slope[k] * mech.y[j] + icpt[k]);
        v[j] = best;
    }
    if (std::abs(v[0] - mech.y[0]) > 1e-9) {
        std::ostringstream os;
        os << "virtual loss at x_lo is " << v[0] << ", expected " << mech.y[0];
        throw InvariantViolation(os.str());
    }
    v[0] = mech.y[0];
    std::string why = LossFunction::violation(mech.y, v, LossClass::Lambda, env.tau, 1e-9);
    if (!why.empty()) throw InvariantViolation("virtual loss not in Lambda: " + why);
    // Remove sub-tolerance wiggles so downstream certificates hold exactly.
    for (std::size_t j = 1; j < n; ++j) v[j] = std::min(std::max(v[j], v[j - 1]), mech.y[j]);
    return LossFunction(mech.y, std::move(v), LossClass::Lambda, env.tau, 1e-9);
}

TightenResult tighten(const Environment& env, const Mechanism& mech, SolveOptions opts) {
    const std::string infeasible = mech.feasibility_violation(env.tau);
    if (!infeasible.empty()) throw InvariantViolation("tighten input infeasible: " + infeasible);
    TightenResult out;
    const IncentiveReport ic = check_incentives(env, mech);
    if (!ic.ic_ok) {
        std::ostringstream os;
        os << "input IC slack " << ic.worst_ic_slack << " at " << ic.ic_violations.size() << " knot(s)";
        out.warnings.push_back(os.str());
    }
    if (!ic.obedience_ok) {
        std::ostringstream os;
        os << "input obedience residual " << ic.worst_obedience_residual;
        out.warnings.push_back(os.str());
    }
    const LossFunction lam_m = induced_loss(env, mech);
    out.lam_plus = regularize_plus(lam_m, env.tau);
    out.lam_tilde = virtual_loss(env, mech, out.lam_plus);
    out.mech = solve_tight(env, out.lam_tilde, opts, &mech.e_A);
    return out;
}

std::string to_string(Region r) {
    switch (r) {
        case Region::EpOne: return "ep_one";
        case Region::SL: return "I_SL";
        case Region::L: return "I_L";
        case Region::M: return "I_M";
        case Region::H: return "I_H";
        case Region::SH: return "I_SH";
        case Region::EpZero: return "ep_zero";
    }
    return "?";
}

const IntervalBounds& IntervalPartition::operator[](Region r) const {
    switch (r) {
        case Region::EpOne: return ep_one;
        case Region::EpZero: return ep_zero;
        default: return intervals[static_cast<std::size_t>(r) - 1];
    }
}

bool IntervalPartition::random_audits() const {
    return std::any_of(intervals.begin(), intervals.end(), [](const IntervalBounds& b) { return !b.empty; });
}

IntervalPartition classify(const Environment& env, const LossFunction& lam, const Mechanism& mech, double band) {
    const std::size_t n = mech.size();
    if (lam.size() != n) throw DomainError("classify: mechanism and loss grids differ");
    IntervalPartition part;
    part.labels.resize(n);
    part.d1.resize(n);
    part.d2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = mech.y[i];
        const double a = alpha(lam, y);
        const double u = evidence_rent(env, mech.e_A[i]);
        part.d1[i] = y - u - lam.at(i);
        part.d2[i] = (1.0 - a) * y - u - lam.at(i) - a * env.tau;
        const double eP = mech.e_P[i];
        Region r;
        if (eP >= 1.0)
            r = Region::EpOne;
        else if (eP <= 0.0)
            r = Region::EpZero;
        else if (part.d2[i] > band)
            r = Region::SH;
        else if (part.d1[i] < -band)
            r = Region::SL;
        else if (std::abs(part.d1[i]) <= band)
            r = Region::L;
        else if (part.d2[i] >= -band)
            r = Region::H;
        else
            r = Region::M;
        part.labels[i] = r;
    }

    // Consecutiveness post-pass: a run of a single knot whose label breaks the
    // order takes the label of the preceding run.
    auto& lab = part.labels;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const bool isolated = (i == 0 || lab[i - 1] != lab[i]) && (i + 1 == n || lab[i + 1] != lab[i]);
            if (!isolated) continue;
            const bool after_prev = i == 0 || lab[i - 1] <= lab[i];
            const bool before_next = i + 1 == n || lab[i] <= lab[i + 1];
            if (after_prev && before_next) continue;
            if (i > 0 && i + 1 < n && lab[i - 1] <= lab[i + 1]) {
                lab[i] = lab[i - 1];
            } else if (i > 0 && !after_prev) {
                lab[i] = lab[i - 1];
            } else if (i + 1 < n) {
                lab[i] = lab[i + 1];
            }
            ++part.relabeled;
            changed = true;
        }
        if (part.relabeled > n) break;
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (lab[i] < lab[i - 1]) {
            std::ostringstream os;
            os << "regime labels out of order at y = " << mech.y[i] << " (" << to_string(lab[i - 1]) << " before "
               << to_string(lab[i]) << ")";
            throw ClassificationAmbiguity(os.str());
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        IntervalBounds* b = nullptr;
        switch (lab[i]) {
            case Region::EpOne: b = &part.ep_one; break;
            case Region::EpZero: b = &part.ep_zero; break;
            default: b = &part.intervals[static_cast<std::size_t>(lab[i]) - 1]; break;
        }
        if (b->empty) {
            b->empty = false;
            b->first = i;
            b->lo = mech.y[i];
        }
        b->last = i;
        b->hi = mech.y[i];
    }
    return part;
}

double debt_relief_effort(const Environment& env) {
    const double cp1 = env.cP(1.0);
    auto f = [&](double e) { return -(e * env.c_A.d1(e) + (1.0 - e) * cp1); };
    return detail::golden_section_max(f, 0.0, 1.0, 1e-12).first;
}

Mechanism debt_with_relief(const Environment& env, const std::vector<double>& grid, double y0) {
    if (!(y0 >= env.x_lo && y0 <= env.x_hi)) throw DomainError("face value y0 outside the type interval");
    const double e_bar = debt_relief_effort(env);
    const double r_bar = env.c_A.d1(e_bar);
    Mechanism m = Mechanism::zeros(grid, Provenance::Constructed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool defaulter = grid[i] < y0;
        m.e_P[i] = defaulter ? 1.0 : 0.0;
        m.e_A[i] = defaulter ? e_bar : 0.0;
        m.r_A[i] = defaulter ? r_bar : 0.0;
        m.r_empty[i] = std::max(grid[i] - y0, 0.0);
    }
    m.normalize_never_paid();
    return m;
}

}  // namespace tightmech
