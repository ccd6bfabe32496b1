// SPDX-License-Identifier: MIT
#include "tightmech/optimality.hpp"

#include "numerics.hpp"
#include "tightmech/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace tightmech {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool random_audit(double eP) { return eP > 0.0 && eP < 1.0; }

// One-sided slopes of the piecewise-linear λ at knot k, with linear slope
// extrapolation at the grid ends.
std::pair<double, double> knot_slopes(const LossFunction& lam, std::size_t k) {
    const auto& g = lam.grid();
    const std::size_t n = g.size();
    auto seg = [&](std::size_t j) { return (lam.at(j + 1) - lam.at(j)) / (g[j + 1] - g[j]); };
    double sl = 0.0;
    double sr = 0.0;
    if (k > 0) sl = seg(k - 1);
    if (k + 1 < n) sr = seg(k);
    if (k == 0) sl = n > 2 ? 2.0 * seg(0) - seg(1) : seg(0);
    if (k + 1 == n) sr = n > 2 ? 2.0 * seg(n - 2) - seg(n - 3) : seg(n - 2);
    return {sl, sr};
}

}  // namespace

BindingICReport binding_ics(const Environment& env, const LossFunction& lam, const Mechanism& mech) {
    const auto& g = lam.grid();
    const std::size_t n = g.size();
    if (mech.size() != n) throw DomainError("binding_ics: mechanism and loss grids differ");
    BindingICReport rep;
    rep.band = 1e-8 * (1.0 + std::abs(env.x_hi));
    rep.contact_lo.assign(n, kNaN);
    rep.contact_hi.assign(n, kNaN);
    rep.selection.assign(n, kNaN);
    for (std::size_t i = 0; i < n; ++i) {
        const double eP = mech.e_P[i];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = i; k < n; ++k) best = std::max(best, lam.at(k) - eP * g[k]);
        std::size_t lo = n;
        std::size_t hi = i;
        for (std::size_t k = i; k < n; ++k) {
            if (lam.at(k) - eP * g[k] >= best - rep.band) {
                lo = std::min(lo, k);
                hi = k;
            }
        }
        rep.contact_lo[i] = g[lo];
        rep.contact_hi[i] = g[hi];
        if (hi > lo + 1) {
            // λ affine over the contact set: take its largest point.
            rep.wide_contacts.push_back(i);
            rep.selection[i] = g[hi];
            continue;
        }
        // Place the contact point inside the cell of knot `lo` according to
        // where e_P falls between λ's one-sided slopes there; a tie between
        // two adjacent knots lands on the segment midpoint.
        auto [sl, sr] = knot_slopes(lam, lo);
        const double h_left = lo > 0 ? g[lo] - g[lo - 1] : g[1] - g[0];
        const double h_right = lo + 1 < n ? g[lo + 1] - g[lo] : g[lo] - g[lo - 1];
        double t = sl - sr > 1e-15 ? (sl - eP) / (sl - sr) : 0.5;
        t = std::clamp(t, 0.0, 1.0);
        double x = t < 0.5 ? g[lo] - (0.5 - t) * h_left : g[lo] + (t - 0.5) * h_right;
        x = std::clamp(x, g[i], g.back());
        rep.selection[i] = x;
    }
    bool unique = true;
    bool mono = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (!random_audit(mech.e_P[i])) continue;
        if (std::find(rep.wide_contacts.begin(), rep.wide_contacts.end(), i) != rep.wide_contacts.end()) unique = false;
        if (!(rep.selection[i] > prev)) mono = false;
        prev = rep.selection[i];
    }
    rep.monotone = mono;
    rep.doubly_unique = unique && mono;
    return rep;
}

Impacts impacts(const Environment& env, const Mechanism& mech, const IntervalPartition& part,
                const std::vector<double>& selection) {
    const std::size_t n = mech.size();
    Impacts out;
    out.D.assign(n, kNaN);
    out.I.assign(n, kNaN);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = mech.e_A[i];
        const double eP = mech.e_P[i];
        if (e > 0.0) {
            out.D[i] = (env.c_A.d1(e) - env.cP(eP)) / evidence_rent_derivative(env, e);
        } else if (random_audit(eP)) {
            std::ostringstream os;
            os << "direct impact undefined: e_A = 0 at y = " << mech.y[i] << " with random audits";
            throw DomainError(os.str());
        }
        const Region r = part.labels[i];
        if (r == Region::EpOne || r == Region::EpZero) continue;
        const double y = mech.y[i];
        const double xh = selection[i];
        const double num = (1.0 - e) * env.cP1(eP);
        switch (r) {
            case Region::SL:
            case Region::L:
            case Region::M: out.I[i] = num / (xh - y); break;
            case Region::H: out.I[i] = num / (xh - y) - (y + env.tau) / (xh - y) * out.D[i]; break;
            case Region::SH: out.I[i] = num / (xh + env.tau); break;
            default: break;
        }
    }
    return out;
}

double expected_profit(const Environment& env, const Mechanism& mech, const TypeDistribution& F) {
    const auto pi = profit(env, mech);
    std::vector<double> g(mech.size());
    for (std::size_t i = 0; i < mech.size(); ++i) g[i] = pi[i] * F.pdf(mech.y[i]);
    return detail::trapezoid(mech.y, g);
}

namespace {

// Running integral of a piecewise-linear integrand given by knot values.
class Cumulative {
public:
    Cumulative(const std::vector<double>& x, std::vector<double> v) : x_(x), v_(std::move(v)), c_(x.size(), 0.0) {
        for (std::size_t i = 1; i < x_.size(); ++i) c_[i] = c_[i - 1] + 0.5 * (x_[i] - x_[i - 1]) * (v_[i] + v_[i - 1]);
    }
    [[nodiscard]] double operator()(double t) const {
        const std::size_t k = detail::segment_of(x_, t);
        const double vt = detail::interpolate(x_, v_, t);
        return c_[k] + 0.5 * (t - x_[k]) * (v_[k] + vt);
    }

private:
    const std::vector<double>& x_;
    std::vector<double> v_;
    std::vector<double> c_;
};

// Fills NaN entries by carrying the nearest finite neighbour.
std::vector<double> fill_gaps(std::vector<double> v) {
    double last = kNaN;
    for (double& d : v) {
        if (std::isfinite(d))
            last = d;
        else if (std::isfinite(last))
            d = last;
    }
    last = kNaN;
    for (auto it = v.rbegin(); it != v.rend(); ++it) {
        if (std::isfinite(*it))
            last = *it;
        else
            *it = std::isfinite(last) ? last : 0.0;
    }
    return v;
}

}  // namespace

OptimalityReport foc_residuals(const Environment& env, const LossFunction& lam, const Mechanism& mech,
                               const TypeDistribution& F, std::uint64_t seed, int random) {
    OptimalityReport rep;
    const auto& g = mech.y;
    const std::size_t n = g.size();
    rep.part = classify(env, lam, mech);
    const BindingICReport bic = binding_ics(env, lam, mech);
    rep.selection = bic.selection;
    rep.imp = impacts(env, mech, rep.part, rep.selection);
    rep.expected_profit = expected_profit(env, mech, F);

    for (std::size_t i = 0; i < n; ++i) {
        const Region r = rep.part.labels[i];
        const double D = rep.imp.D[i];
        if (r == Region::SL) rep.residual_SL = std::max(rep.residual_SL, std::abs(D + 1.0));
        if (r == Region::M) rep.residual_M = std::max(rep.residual_M, std::abs(D));
        if (r != Region::SH) continue;
        rep.residual_SH_selection = std::max(rep.residual_SH_selection, std::abs(D - rep.imp.I[i]));
        // β is a maximum of ratios affine in the agent's rent; at a kink the
        // first-order condition places D in the hull of the active indirect
        // impacts.
        const double e = mech.e_A[i];
        const double s = lam.at(i) + evidence_rent(env, e);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) best = std::max(best, (lam.at(k) - s) / (g[k] + env.tau));
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        const double num = (1.0 - e) * env.cP1(mech.e_P[i]);
        for (std::size_t k = 0; k < n; ++k) {
            if ((lam.at(k) - s) / (g[k] + env.tau) >= best - 1e-9) {
                lo = std::min(lo, num / (g[k] + env.tau));
                hi = std::max(hi, num / (g[k] + env.tau));
            }
        }
        const double dist = D < lo ? lo - D : (D > hi ? D - hi : 0.0);
        rep.residual_SH = std::max(rep.residual_SH, dist);
    }
    for (std::size_t i : bic.wide_contacts)
        if (random_audit(mech.e_P[i])) rep.selection_dependent = true;

    // Integral condition on the random-audit region.
    std::size_t first = n;
    std::size_t last = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Region r = rep.part.labels[i];
        if (r == Region::EpOne || r == Region::EpZero || !std::isfinite(rep.imp.I[i])) continue;
        first = std::min(first, i);
        last = std::max(last, i);
    }
    // The conditions concern the open type interval: drop the end knots,
    // where x̂ - y degenerates.
    if (first == 0) ++first;
    if (last + 1 == n) --last;
    rep.inf_selection = std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i <= last && i < n; ++i) rep.inf_selection = std::min(rep.inf_selection, rep.selection[i]);
    const auto& sl = rep.part[Region::SL];
    rep.sup_SL = sl.empty ? g.front() : sl.hi;
    const double step = n > 1 ? (g.back() - g.front()) / static_cast<double>(n - 1) : 0.0;
    rep.boundary_flag = std::abs(rep.inf_selection - rep.sup_SL) > step;
    if (first >= last) return rep;

    std::vector<double> gi(n, 0.0);
    std::vector<double> gd(n, 0.0);
    const std::vector<double> Dfull = fill_gaps(rep.imp.D);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = F.pdf(g[i]);
        gi[i] = std::isfinite(rep.imp.I[i]) ? rep.imp.I[i] * f : 0.0;
        gd[i] = (1.0 + Dfull[i]) * f;
    }
    const Cumulative CI(g, std::move(gi));
    const Cumulative CD(g, std::move(gd));
    std::vector<double> sel(rep.selection.begin() + static_cast<std::ptrdiff_t>(first),
                            rep.selection.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    std::vector<double> sub(g.begin() + static_cast<std::ptrdiff_t>(first), g.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    auto xhat = [&](double t) { return detail::interpolate(sub, sel, t); };
    auto residual = [&](double a, double b) {
        const double lhs = CI(b) - CI(a);
        const double rhs = CD(std::min(xhat(b), g.back())) - CD(std::min(xhat(a), g.back()));
        return std::abs(lhs - rhs);
    };
    const double lo = g[first];
    const double hi = g[last];
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(lo, hi);
    for (int j = 0; j < random; ++j) {
        double a = U(rng);
        double b = U(rng);
        if (a > b) std::swap(a, b);
        rep.integral_residual = std::max(rep.integral_residual, residual(a, b));
        ++rep.integral_intervals;
    }
    for (int level = 1; level <= 4; ++level) {
        const int pieces = 1 << level;
        for (int p = 0; p < pieces; ++p) {
            const double a = lo + (hi - lo) * p / pieces;
            const double b = lo + (hi - lo) * (p + 1) / pieces;
            rep.integral_residual = std::max(rep.integral_residual, residual(a, b));
            ++rep.integral_intervals;
        }
    }
    return rep;
}

InteriorEffortChecks interior_effort_checks(const Environment& env, const Mechanism& mech) {
    InteriorEffortChecks t;
    const auto U = interim_utility(env, mech);
    t.min_U = *std::min_element(U.begin(), U.end());
    t.max_eP = *std::max_element(mech.e_P.begin(), mech.e_P.end());
    t.min_eP_interior = *std::min_element(mech.e_P.begin(), mech.e_P.end() - 1);
    return t;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

std::vector<double> slopes_from_params(const std::vector<double>& z) {
    std::vector<double> s(z.size());
    double run = 1.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        run *= sigmoid(z[j]);
        s[j] = run;
    }
    return s;
}

std::vector<double> params_from_slopes(const std::vector<double>& slopes) {
    constexpr double eps = 1e-6;
    std::vector<double> z(slopes.size());
    double prev = 1.0;
    for (std::size_t j = 0; j < slopes.size(); ++j) {
        const double s = std::clamp(std::min(slopes[j], prev), eps, 1.0 - eps);
        z[j] = logit(std::clamp(s / prev, eps, 1.0 - eps));
        prev = prev * sigmoid(z[j]);
    }
    return z;
}

LossFunction loss_from_slopes(const Environment& env, const std::vector<double>& slopes,
                              const std::vector<double>& grid) {
    if (slopes.empty()) throw DomainError("loss_from_slopes: need at least one slope");
    const std::size_t K = slopes.size();
    const double h = (env.x_hi - env.x_lo) / static_cast<double>(K);
    std::vector<double> kx(K + 1);
    std::vector<double> kv(K + 1);
    kx[0] = env.x_lo;
    kv[0] = env.x_lo;
    for (std::size_t j = 0; j < K; ++j) {
        kx[j + 1] = env.x_lo + h * static_cast<double>(j + 1);
        kv[j + 1] = kv[j] + h * slopes[j];
    }
    kx[K] = env.x_hi;
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = std::min(detail::interpolate(kx, kv, grid[i]), grid[i]);
    v[0] = env.x_lo;
    return LossFunction(grid, std::move(v), LossClass::Lambda, env.tau, 1e-9);
}

DebtBenchmark best_debt(const Environment& env, const TypeDistribution& F, double step) {
    const auto grid = F.grid;
    DebtBenchmark best{env.x_lo, -std::numeric_limits<double>::infinity()};
    const auto count = static_cast<int>(std::floor((env.x_hi - env.x_lo) / step + 1e-9));
    for (int j = 0; j <= count; ++j) {
        const double y0 = std::min(env.x_lo + step * j, env.x_hi);
        const double p = expected_profit(env, debt_with_relief(env, grid, y0), F);
        if (p > best.profit) best = {y0, p};
    }
    return best;
}

namespace {

struct SearchState {
    const Environment* env;
    const TypeDistribution* F;
    std::vector<double> grid;
    SolveOptions solve;
    std::size_t budget;
    std::size_t used = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<double> best_z;

    // Negative expected profit; infeasible or failed candidates score +1e6.
    double evaluate(const std::vector<double>& z) {
        if (used >= budget) return 1e6;
        ++used;
        double v = -1e6;
        try {
            const LossFunction lam = loss_from_slopes(*env, slopes_from_params(z), grid);
            v = expected_profit(*env, solve_tight(*env, lam, solve), *F);
        } catch (const std::exception&) {
            v = -1e6;
        }
        if (v > best_value) {
            best_value = v;
            best_z = z;
        }
        return -v;
    }
};

double nm_objective(const gsl_vector* x, void* params) {
    auto* st = static_cast<SearchState*>(params);
    std::vector<double> z(x->size);
    for (std::size_t j = 0; j < x->size; ++j) z[j] = gsl_vector_get(x, j);
    return st->evaluate(z);
}

// One Nelder–Mead run; returns true if the simplex collapsed below `size_tol`.
bool nelder_mead(SearchState& st, const std::vector<double>& z0, std::size_t cap, double size_tol = 1e-5) {
    const std::size_t dim = z0.size();
    const std::size_t stop_at = std::min(st.budget, st.used + cap);
    gsl_multimin_function fn{&nm_objective, dim, &st};
    gsl_vector* x = gsl_vector_alloc(dim);
    gsl_vector* step = gsl_vector_alloc(dim);
    for (std::size_t j = 0; j < dim; ++j) gsl_vector_set(x, j, z0[j]);
    gsl_vector_set_all(step, 0.5);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    bool converged = false;
    if (st.used + dim + 1 <= stop_at) {
        gsl_multimin_fminimizer_set(s, &fn, x, step);
        while (st.used + 2 <= stop_at) {
            if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol) == GSL_SUCCESS) {
                converged = true;
                break;
            }
        }
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return converged;
}

}  // namespace

OptimizeResult optimize_loss(const Environment& env, const TypeDistribution& F, OptimizeOptions opts) {
    if (opts.knots == 0) throw DomainError("optimize_loss: knots must be positive");
    gsl_set_error_handler_off();
    SearchState st;
    st.env = &env;
    st.F = &F;
    st.grid = type_grid(env, opts.grid);
    st.solve.jobs = opts.jobs;
    st.budget = opts.budget;
    const std::size_t K = opts.knots;

    // Starting points: seeded random slope vectors, the best debt contract's
    // loss min{x, y0} and the concave exponential loss.
    std::vector<std::vector<double>> starts;
    const DebtBenchmark debt = best_debt(env, F);
    {
        const double h = (env.x_hi - env.x_lo) / static_cast<double>(K);
        std::vector<double> sd(K);
        std::vector<double> se(K);
        for (std::size_t j = 0; j < K; ++j) {
            const double a = env.x_lo + h * static_cast<double>(j);
            const double b = a + h;
            sd[j] = std::clamp((std::min(b, debt.y0_best) - std::min(a, debt.y0_best)) / h, 0.0, 1.0);
            se[j] = (std::exp(-(a - env.x_lo)) - std::exp(-(b - env.x_lo))) / h;
        }
        starts.push_back(params_from_slopes(sd));
        starts.push_back(params_from_slopes(se));
    }
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> first(1.5, 1.5);
    std::normal_distribution<double> rest(2.5, 2.0);
    for (std::size_t r = 0; r < opts.restarts; ++r) {
        std::vector<double> z(K);
        z[0] = first(rng);
        for (std::size_t j = 1; j < K; ++j) z[j] = rest(rng);
        starts.push_back(std::move(z));
    }

    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t s = 0; s < starts.size(); ++s) scored.emplace_back(-st.evaluate(starts[s]), s);
    const bool seeded = st.used == starts.size();
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    // Simplex runs from the three most promising starts, then restarts from
    // the incumbent until the budget is spent.
    std::size_t converged = 0;
    const std::size_t leading = std::min<std::size_t>(3, scored.size());
    for (std::size_t r = 0; r < leading && st.used < st.budget; ++r) {
        const std::size_t cap = (st.budget - st.used) / (leading - r + 1);
        if (nelder_mead(st, starts[scored[r].second], cap)) ++converged;
    }
    while (st.used + K + 3 < st.budget) {
        const std::size_t before = st.used;
        const double before_best = st.best_value;
        if (nelder_mead(st, st.best_z, st.budget - st.used)) ++converged;
        if (st.used == before || st.best_value <= before_best + 1e-12) break;
    }

    auto result = std::make_shared<OptimizeResult>();
    result->slopes = slopes_from_params(st.best_z);
    result->lam = loss_from_slopes(env, result->slopes, st.grid);
    result->mech = solve_tight(env, result->lam, st.solve);
    result->expected_profit = expected_profit(env, result->mech, F);
    result->evaluations = st.used;
    result->converged_runs = converged;
    try {
        result->report = foc_residuals(env, result->lam, result->mech, F, opts.seed);
    } catch (const std::exception&) {
        result->report.expected_profit = result->expected_profit;
    }
    if (!seeded || st.used < starts.size() + K + 1) {
        std::ostringstream os;
        os << "budget of " << opts.budget << " inner solves exhausted before a simplex could be formed";
        throw BudgetExhausted(os.str(), result);
    }
    return *result;
}

}  // namespace tightmech
