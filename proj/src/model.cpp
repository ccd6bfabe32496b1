// SPDX-License-Identifier: MIT
#include "tightmech/model.hpp"

#include "numerics.hpp"
#include "tightmech/errors.hpp"

// Boost 1.74's pchip calls isnan unqualified.
#include <cmath>
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tightmech {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kEm1 = std::exp(1.0) - 1.0;

// e^q with the conventions 0^0 = 1 and 0^q = +inf for q < 0.
double powq(double e, double q) {
    if (e == 0.0) return q == 0.0 ? 1.0 : (q > 0.0 ? 0.0 : kInf);
    return std::pow(e, q);
}

// Coefficient * e^q where a zero coefficient annihilates the (possibly
// infinite) power; keeps c''' finite for p = 2 at e = 0.
double term(double coef, double e, double q) {
    if (coef == 0.0) return 0.0;
    return coef * powq(e, q);
}

void require_unit(double e, const char* what) {
    if (!(e >= 0.0 && e <= 1.0)) {
        std::ostringstream os;
        os << what << " must lie in [0,1], got " << e;
        throw DomainError(os.str());
    }
}

}  // namespace

struct CostFunction::Table {
    boost::math::interpolators::pchip<std::vector<double>> spline;
    double lo;
    double hi;
    std::vector<double> nodes;
    std::vector<double> values;
};

CostFunction CostFunction::power(double p, double scale) {
    if (!(p >= 1.0) || !(scale > 0.0) || !std::isfinite(p) || !std::isfinite(scale))
        throw DomainError("power cost needs p >= 1 and scale > 0");
    CostFunction c;
    c.family_ = CostFamily::Power;
    c.params_ = {p, scale};
    return c;
}

CostFunction CostFunction::exp_normalized(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("exp-normalized cost needs scale > 0");
    CostFunction c;
    c.family_ = CostFamily::ExpNormalized;
    c.params_ = {scale};
    return c;
}

CostFunction CostFunction::tabulated(std::vector<double> nodes, std::vector<double> values) {
    if (nodes.size() != values.size() || nodes.size() < 4)
        throw DomainError("tabulated cost needs at least four (e, c) pairs of equal length");
    if (!std::is_sorted(nodes.begin(), nodes.end()) ||
        std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end())
        throw DomainError("tabulated cost nodes must be strictly ascending");
    if (nodes.front() != 0.0 || nodes.back() != 1.0)
        throw DomainError("tabulated cost nodes must span exactly [0,1]");
    CostFunction c;
    c.family_ = CostFamily::Tabulated;
    c.params_ = {1.0};
    double lo = nodes.front();
    double hi = nodes.back();
    std::vector<double> n0 = nodes;
    std::vector<double> v0 = values;
    // c'(0) = 0 is imposed at the left end.
    c.table_ = std::make_shared<const Table>(
        Table{boost::math::interpolators::pchip<std::vector<double>>(std::move(nodes), std::move(values), 0.0),
              lo, hi, std::move(n0), std::move(v0)});
    return c;
}

CostFunction CostFunction::scaled(double kappa) const {
    if (!(kappa > 0.0)) throw DomainError("cost scaling must be positive");
    CostFunction c = *this;
    if (family_ == CostFamily::Power)
        c.params_[1] *= kappa;
    else
        c.params_[0] *= kappa;
    return c;
}

std::vector<double> CostFunction::table_nodes() const {
    return table_ ? table_->nodes : std::vector<double>{};
}

std::vector<double> CostFunction::table_values() const {
    if (!table_) return {};
    std::vector<double> v = table_->values;
    for (double& x : v) x *= params_[0];
    return v;
}

std::string CostFunction::family_name() const {
    switch (family_) {
        case CostFamily::Power: return "power";
        case CostFamily::ExpNormalized: return "exp-normalized";
        case CostFamily::Tabulated: return "user-tabulated";
    }
    return "unknown";
}

double CostFunction::derivative(int k, double e) const {
    switch (family_) {
        case CostFamily::Power: {
            const double p = params_[0];
            const double s = params_[1];
            switch (k) {
                case 0: return term(s / p, e, p);
                case 1: return term(s, e, p - 1.0);
                case 2: return term(s * (p - 1.0), e, p - 2.0);
                case 3: return term(s * (p - 1.0) * (p - 2.0), e, p - 3.0);
                default: break;
            }
            break;
        }
        case CostFamily::ExpNormalized: {
            const double s = params_[0] / kEm1;
            switch (k) {
                case 0: return s * (std::expm1(e) - e);
                case 1: return s * std::expm1(e);
                case 2:
                case 3: return s * std::exp(e);
                default: break;
            }
            break;
        }
        case CostFamily::Tabulated: {
            const double s = params_[0];
            const auto& t = *table_;
            auto clampx = [&](double v) { return std::clamp(v, t.lo, t.hi); };
            auto prime = [&](double v) { return t.spline.prime(clampx(v)); };
            constexpr double h2 = 1e-5;
            constexpr double h3 = 1e-3;
            auto second = [&](double v) {
                double a = clampx(v - h2);
                double b = clampx(v + h2);
                return (prime(b) - prime(a)) / (b - a);
            };
            switch (k) {
                case 0: return s * t.spline(clampx(e));
                case 1: return s * prime(e);
                case 2: return s * second(e);
                case 3: {
                    double a = clampx(e - h3);
                    double b = clampx(e + h3);
                    return s * (second(b) - second(a)) / (b - a);
                }
                default: break;
            }
            break;
        }
    }
    throw DomainError("cost derivative order must be 0..3");
}

double CostFunction::curvature_ratio(double e) const {
    switch (family_) {
        case CostFamily::Power: {
            const double p = params_[0];
            if (p == 1.0) return kNaN;  // c'' vanishes identically
            return p - 2.0;
        }
        case CostFamily::ExpNormalized: return e;
        case CostFamily::Tabulated: {
            double c2 = d2(e);
            if (!(c2 > 0.0)) return kNaN;
            return e * d3(e) / c2;
        }
    }
    return kNaN;
}

void CostFunction::validate(std::size_t grid) const {
    std::ostringstream os;
    if (std::abs(value(0.0)) > 1e-12) os << "c(0) = " << value(0.0) << " != 0; ";
    if (std::abs(d1(0.0)) > 1e-12) os << "c'(0) = " << d1(0.0) << " != 0; ";
    for (std::size_t i = 1; i + 1 < grid; ++i) {
        double e = static_cast<double>(i) / static_cast<double>(grid - 1);
        if (!(d1(e) > 0.0)) {
            os << "c' not positive at e = " << e << "; ";
            break;
        }
        if (!(d2(e) > 0.0)) {
            os << "c'' not positive at e = " << e << "; ";
            break;
        }
    }
    std::string msg = os.str();
    if (!msg.empty()) throw InvariantViolation(family_name() + " cost: " + msg);
}

Environment Environment::make(double x_lo, double x_hi, double tau, CostFunction c_A, CostFunction c_P,
                              double kappa, bool checked) {
    if (!(x_lo >= 0.0) || !(x_hi > x_lo) || !std::isfinite(x_hi))
        throw InvariantViolation("environment needs 0 <= x_lo < x_hi < inf");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvariantViolation("environment needs tau > 0");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvariantViolation("environment needs kappa > 0");
    Environment env{x_lo, x_hi, tau, std::move(c_A), std::move(c_P), kappa};
    if (checked) {
        env.c_A.validate();
        env.c_P_base.validate();
        auto rep = check_assumptions(env);
        if (!rep.all()) {
            std::ostringstream os;
            os << "environment violates assumptions:";
            if (!rep.budget) os << " budget (" << rep.budget_witness << ")";
            if (!rep.regularity) os << " regularity (e_A = " << rep.regularity_witness.value_or(kNaN) << ")";
            if (!rep.rent_regularity)
                os << " rent-regularity (e_A = " << rep.rent_regularity_witness.value_or(kNaN) << ")";
            throw InvariantViolation(os.str());
        }
    }
    return env;
}

Environment Environment::figure1() {
    return make(0.0, 1.0, 1.0, CostFunction::exp_normalized(), CostFunction::power(1.01), 1.0, true);
}

std::vector<double> type_grid(const Environment& env, std::size_t n) {
    if (n < 2) throw DomainError("type grid needs at least two points");
    std::vector<double> g(n);
    const double span = env.x_hi - env.x_lo;
    for (std::size_t i = 0; i < n; ++i)
        g[i] = env.x_lo + span * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = env.x_hi;
    return g;
}

double evidence_rent(const Environment& env, double e_A) {
    require_unit(e_A, "agent effort");
    if (e_A == 0.0) return 0.0;
    return e_A * env.c_A.d1(e_A) - env.c_A.value(e_A);
}

double evidence_rent_derivative(const Environment& env, double e_A) {
    require_unit(e_A, "agent effort");
    if (e_A == 0.0) return 0.0;
    return e_A * env.c_A.d2(e_A);
}

double evidence_rent_second_derivative(const Environment& env, double e_A) {
    require_unit(e_A, "agent effort");
    if (e_A == 0.0) return env.c_A.d2(0.0);
    return env.c_A.d2(e_A) + e_A * env.c_A.d3(e_A);
}

double efficient_effort(const Environment& env, double e_P) {
    require_unit(e_P, "principal effort");
    const double target = env.cP(e_P);
    if (!(target > 0.0)) return 0.0;
    if (env.c_A.d1(1.0) <= target) return 1.0;
    auto f = [&](double e) { return env.c_A.d1(e) - target; };
    boost::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15; };
    auto r = boost::math::tools::toms748_solve(f, 0.0, 1.0, f(0.0), f(1.0), tol, iters);
    return 0.5 * (r.first + r.second);
}

AssumptionReport check_assumptions(const Environment& env, std::size_t grid, double strict_slack) {
    AssumptionReport rep;
    rep.approximate = env.c_A.approximate() || env.c_P_base.approximate();

    const double cA1 = env.c_A.d1(1.0);
    const double cP_1 = env.cP(1.0);
    if (!(env.tau >= cA1)) {
        std::ostringstream os;
        os << "tau < c_A'(1): " << env.tau << " < " << cA1;
        rep.budget_witness = os.str();
    } else if (!(cA1 > cP_1)) {
        std::ostringstream os;
        os << "c_A'(1) <= c_P(1): " << cA1 << " <= " << cP_1;
        rep.budget_witness = os.str();
    } else {
        rep.budget = true;
    }

    const double lead = (env.x_lo + env.tau) / env.cP1(1.0);
    rep.regularity = true;
    rep.rent_regularity = true;
    rep.regularity_min_slack = kInf;
    rep.rent_regularity_min_slack = kInf;
    for (std::size_t i = 0; i < grid; ++i) {
        const double e = static_cast<double>(i) / static_cast<double>(grid - 1);
        // Regularity, written with the curvature ratio e c'''/c''.
        const double ratio = env.c_A.curvature_ratio(e);
        double slack = lead + e - ((1.0 - e) * ratio + 1.0 - e);
        if (std::isnan(slack)) slack = -kInf;
        if (i == 0) {
            rep.regularity_boundary_slack = slack;
        } else {
            rep.regularity_min_slack = std::min(rep.regularity_min_slack, slack);
            if (!(slack >= strict_slack) && rep.regularity) {
                rep.regularity = false;
                rep.regularity_witness = e;
            }
        }
        // Rent regularity: (e c_A')'' = 2 c_A'' + e c_A''' > 0.
        const double c2 = env.c_A.d2(e);
        const double c3 = e == 0.0 ? 0.0 : e * env.c_A.d3(e);
        double rr = 2.0 * c2 + c3;
        if (std::isnan(rr)) rr = -kInf;
        rep.rent_regularity_min_slack = std::min(rep.rent_regularity_min_slack, rr);
        if (!(rr >= strict_slack) && rep.rent_regularity) {
            rep.rent_regularity = false;
            rep.rent_regularity_witness = e;
        }
    }
    return rep;
}

namespace {

// c_P extended to negative arguments with constant curvature c_P''(0).
struct ExtendedCost {
    const CostFunction& c;
    double kappa;
    [[nodiscard]] double d1(double q) const {
        return q >= 0.0 ? kappa * c.d1(q) : kappa * c.d2(0.0) * q;
    }
    [[nodiscard]] double d2(double q) const { return q >= 0.0 ? kappa * c.d2(q) : kappa * c.d2(0.0); }
};

// Smallest eigenvalue of the symmetric 2x2 matrix [[a, b], [b, d]].
double min_eigen(double a, double b, double d) {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(d)) return -kInf;
    const double m = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), b);
    return m - r;
}

}  // namespace

GlobalConcavityReport check_global_concavity(const Environment& env, double e_bar, std::size_t grid, double tol) {
    if (!(e_bar > 0.0 && e_bar < 1.0)) throw DomainError("e_bar must lie in (0,1)");
    if (grid < 3) throw DomainError("global concavity grid needs at least 3 points");
    GlobalConcavityReport rep;
    rep.worst_eigenvalue = kInf;
    rep.min_ee_at_zero = kInf;
    const ExtendedCost cp{env.c_P_base, env.kappa};
    const auto lin = [&](double lo, double hi, std::size_t i) {
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid - 1);
    };

    auto record = [&](double ev, int which) {
        ++rep.points;
        if (ev < rep.worst_eigenvalue) {
            rep.worst_eigenvalue = ev;
            rep.worst_expression = which;
        }
    };

    for (std::size_t ix = 1; ix < grid; ++ix) {
        const double x = lin(env.x_lo, env.x_hi, ix);
        for (std::size_t iy = 0; iy < ix; ++iy) {
            const double y = lin(env.x_lo, env.x_hi, iy);
            const double w1 = 1.0 / (x - y);
            const double w3 = 1.0 / (x + env.tau);
            for (std::size_t ie = 0; ie < grid; ++ie) {
                const double e = lin(0.0, e_bar, ie);
                const double cA2 = env.c_A.d2(e);
                const double uA1 = evidence_rent_derivative(env, e);
                const double uA2 = evidence_rent_second_derivative(env, e);
                const double uA = evidence_rent(env, e);
                if (ie == 0) rep.min_ee_at_zero = std::min(rep.min_ee_at_zero, uA2 + cA2);
                for (std::size_t il = 0; il < grid; ++il) {
                    // Expressions 1 and 2 in (e, l).
                    const double l = lin(env.x_lo, env.x_hi, il);
                    const double q = (l - y) * w1;
                    const double g_el = -cp.d1(q) * w1;
                    const double g_ll = (1.0 - e) * cp.d2(q) * w1 * w1;
                    record(min_eigen(uA2 + cA2, g_el, g_ll), 1);
                    record(min_eigen(cA2, g_el, g_ll), 2);
                    // Expression 3 in (e, d).
                    const double d = lin(0.0, env.x_hi - env.x_lo, il);
                    const double q3 = (d - uA) * w3;
                    const double c1 = cp.d1(q3);
                    const double c2 = cp.d2(q3);
                    const double h_ee = cA2 + 2.0 * c1 * uA1 * w3 + (1.0 - e) * (c2 * uA1 * uA1 * w3 * w3 - c1 * uA2 * w3);
                    const double h_ed = -c1 * w3 - (1.0 - e) * c2 * uA1 * w3 * w3;
                    const double h_dd = (1.0 - e) * c2 * w3 * w3;
                    record(min_eigen(h_ee, h_ed, h_dd), 3);
                }
            }
        }
    }
    rep.concave = rep.worst_eigenvalue >= -tol;

    rep.cp_ratio_bounded = true;
    rep.cp_ratio_max = 0.0;
    for (std::size_t i = 0; i < 1001; ++i) {
        const double e = static_cast<double>(i) / 1000.0;
        const double r = env.c_P_base.d1(e) / env.c_P_base.d2(e);
        if (!std::isfinite(r)) {
            rep.cp_ratio_bounded = false;
            continue;
        }
        rep.cp_ratio_max = std::max(rep.cp_ratio_max, std::abs(r));
    }
    return rep;
}

TypeDistribution TypeDistribution::uniform(const std::vector<double>& grid) {
    return tabulated(grid, std::vector<double>(grid.size(), 1.0));
}

TypeDistribution TypeDistribution::truncated_exponential(const std::vector<double>& grid, double rate) {
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) f[i] = std::exp(-rate * (grid[i] - grid.front()));
    auto d = tabulated(grid, std::move(f));
    d.kind = DistributionKind::TruncatedExponential;
    return d;
}

TypeDistribution TypeDistribution::tabulated(const std::vector<double>& grid, std::vector<double> density) {
    if (grid.size() < 2 || density.size() != grid.size())
        throw DomainError("distribution needs a density value per grid point");
    for (double v : density)
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("density must be finite and nonnegative");
    const double mass = detail::trapezoid(grid, density);
    if (!(mass > 0.0)) throw DomainError("density has zero mass");
    for (double& v : density) v /= mass;
    TypeDistribution d;
    d.kind = DistributionKind::Tabulated;
    if (std::adjacent_find(density.begin(), density.end(), std::not_equal_to<>()) == density.end())
        d.kind = DistributionKind::Uniform;
    d.grid = grid;
    d.density = std::move(density);
    d.cdf.assign(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i)
        d.cdf[i] = d.cdf[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (d.density[i] + d.density[i - 1]);
    return d;
}

std::vector<double> TypeDistribution::weights() const {
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double h = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += h * density[i - 1];
        w[i] += h * density[i];
    }
    return w;
}

double TypeDistribution::min_density() const { return *std::min_element(density.begin(), density.end()); }

double TypeDistribution::pdf(double x) const { return detail::interpolate(grid, density, x); }

}  // namespace tightmech
