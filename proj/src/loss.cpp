// SPDX-License-Identifier: MIT
#include "tightmech/loss.hpp"

#include "numerics.hpp"
#include "tightmech/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tightmech {

LossFunction::LossFunction(std::vector<double> grid, std::vector<double> values, LossClass cls, double tau,
                           double tol)
    : grid_(std::move(grid)), values_(std::move(values)), cls_(cls) {
    std::string why = violation(grid_, values_, cls_, tau, tol);
    if (!why.empty()) throw InvariantViolation("loss function: " + why);
}

LossFunction LossFunction::from_function(const std::vector<double>& grid, const std::function<double(double)>& f,
                                         LossClass cls, double tau) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
    return LossFunction(grid, std::move(v), cls, tau);
}

std::string LossFunction::violation(const std::vector<double>& grid, const std::vector<double>& values,
                                    LossClass cls, double tau, double tol) {
    std::ostringstream os;
    if (grid.size() < 2 || grid.size() != values.size()) return "needs at least two knots and one value per knot";
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) {
            os << "grid not strictly ascending at knot " << i;
            return os.str();
        }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(values[i])) {
            os << "non-finite value at knot " << i;
            return os.str();
        }
        if (values[i] > grid[i] + tol) {
            os << "lambda exceeds the identity at y = " << grid[i];
            return os.str();
        }
        if (values[i] < -tau - tol || values[i] > grid.back() + tol) {
            os << "value outside [-tau, x_hi] at y = " << grid[i];
            return os.str();
        }
    }
    if (cls == LossClass::Lambda0) return {};
    if (std::abs(values.front() - grid.front()) > tol) {
        os << "lambda(x_lo) = " << values.front() << " != x_lo";
        return os.str();
    }
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (values[i] < values[i - 1] - tol) {
            os << "lambda decreases at y = " << grid[i];
            return os.str();
        }
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double sl = (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]);
        const double sr = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
        // Second difference in value units.
        if ((sr - sl) * std::min(grid[i] - grid[i - 1], grid[i + 1] - grid[i]) > tol) {
            os << "lambda not concave at y = " << grid[i];
            return os.str();
        }
    }
    return {};
}

double LossFunction::operator()(double x) const { return detail::interpolate(grid_, values_, x); }

namespace {

void require_span(const LossFunction& lam, double y) {
    if (!(y >= lam.x_lo() && y <= lam.x_hi())) {
        std::ostringstream os;
        os << "type " << y << " outside [" << lam.x_lo() << ", " << lam.x_hi() << "]";
        throw DomainError(os.str());
    }
}

}  // namespace

double alpha(const LossFunction& lam, double y) {
    require_span(lam, y);
    const auto& g = lam.grid();
    const auto& v = lam.values();
    if (y >= lam.x_hi()) return 0.0;
    const double ly = lam(y);
    double best = 0.0;
    // Knots strictly above y.
    auto it = std::upper_bound(g.begin(), g.end(), y);
    for (auto k = static_cast<std::size_t>(it - g.begin()); k < g.size(); ++k)
        best = std::max(best, (v[k] - y) / (g[k] - y));
    // Right-slope limit when λ touches the identity at y.
    if (ly >= y) {
        const std::size_t s = detail::segment_of(g, y);
        const double slope = (v[s + 1] - v[s]) / (g[s + 1] - g[s]);
        best = std::max(best, slope);
    }
    return std::clamp(best, 0.0, 1.0);
}

double beta(const Environment& env, const LossFunction& lam, double y, double e_A) {
    require_span(lam, y);
    const double s = lam(y) + evidence_rent(env, e_A);
    double best = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k)
        best = std::max(best, (lam.at(k) - s) / (lam.grid()[k] + env.tau));
    return best;
}

double zhat(const Environment& env, const LossFunction& lam, double s) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < lam.size(); ++k) {
        const double r = (lam.at(k) - s) / (lam.grid()[k] + env.tau);
        if (r >= best) {
            best = r;
            arg = k;
        }
    }
    return lam.grid()[arg];
}

RatioMaximizer::RatioMaximizer(const LossFunction& lam, double tau) {
    // Monotone-chain upper hull; collinear interior points are dropped so
    // ties resolve to the rightmost endpoint of a flat stretch.
    for (std::size_t k = 0; k < lam.size(); ++k) {
        const double x = lam.grid()[k] + tau;
        const double v = lam.at(k);
        while (hx_.size() >= 2) {
            const std::size_t n = hx_.size();
            const double cross = (hx_[n - 1] - hx_[n - 2]) * (v - hv_[n - 2]) - (hv_[n - 1] - hv_[n - 2]) * (x - hx_[n - 2]);
            if (cross >= 0.0) {
                hx_.pop_back();
                hv_.pop_back();
                hk_.pop_back();
            } else {
                break;
            }
        }
        hx_.push_back(x);
        hv_.push_back(v);
        hk_.push_back(k);
    }
}

RatioMaximizer::Result RatioMaximizer::query(double s) const {
    auto ratio = [&](std::size_t i) { return (hv_[i] - s) / hx_[i]; };
    // Ratios along the upper hull are unimodal; find the last i whose ratio
    // is at least its predecessor's.
    std::size_t lo = 0;
    std::size_t hi = hx_.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (ratio(mid) >= ratio(mid - 1))
            lo = mid;
        else
            hi = mid - 1;
    }
    return {ratio(lo), hk_[lo]};
}

LossFunction regularize_plus(const LossFunction& raw, double tau) {
    std::vector<double> v(raw.size());
    double run = raw.x_lo();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        run = std::max(run, raw.at(i));
        v[i] = run;
    }
    return LossFunction(raw.grid(), std::move(v), LossClass::Lambda0, tau, 1e-9);
}

SmoothingResult smooth_loss(const LossFunction& lam, int n, double tau) {
    if (n <= 0) throw DomainError("smoothing index n must be positive");
    const auto& g = lam.grid();
    const auto& v = lam.values();
    const std::size_t m = g.size();
    const double last_slope = (v[m - 1] - v[m - 2]) / (g[m - 1] - g[m - 2]);
    const double delta = 1.0 / static_cast<double>(n);

    // Antiderivative A(t) = ∫_{x_lo}^t λ for the linearly extended λ.
    std::vector<double> cum(m, 0.0);
    for (std::size_t i = 1; i < m; ++i) cum[i] = cum[i - 1] + 0.5 * (g[i] - g[i - 1]) * (v[i] + v[i - 1]);
    auto lam_ext = [&](double t) {
        if (t >= g.back()) return v.back() + last_slope * (t - g.back());
        return detail::interpolate(g, v, t);
    };
    auto antider = [&](double t) {
        if (t >= g.back()) return cum.back() + 0.5 * (t - g.back()) * (v.back() + lam_ext(t));
        const std::size_t i = detail::segment_of(g, t);
        return cum[i] + 0.5 * (t - g[i]) * (v[i] + lam_ext(t));
    };
    // λ_n' on the grid, then integrate; the floor keeps λ_n nondecreasing.
    auto deriv = [&](double x) { return -x * delta + (lam_ext(x + delta) - lam_ext(x)) / delta; };

    SmoothingResult out;
    std::vector<double> w(m);
    w[0] = g[0];
    bool floor_active = false;
    for (std::size_t i = 1; i < m; ++i) {
        // Exact integral of the unfloored derivative over [g_{i-1}, g_i].
        const double a = g[i - 1];
        const double b = g[i];
        double inc = -(b * b - a * a) * 0.5 * delta +
                     ((antider(b + delta) - antider(a + delta)) - (antider(b) - antider(a))) / delta;
        // λ_n' is decreasing, so once it turns negative it stays negative.
        if (floor_active || deriv(b) < 0.0 || inc < 0.0) {
            inc = floor_active ? 0.0 : std::max(inc, 0.0);
            floor_active = true;
        }
        w[i] = w[i - 1] + inc;
    }
    // Guard against rounding above the identity.
    for (std::size_t i = 0; i < m; ++i) w[i] = std::min(w[i], g[i]);
    double dist = 0.0;
    for (std::size_t i = 0; i < m; ++i) dist = std::max(dist, std::abs(w[i] - v[i]));
    out.lam = LossFunction(g, std::move(w), LossClass::Lambda, tau, 1e-10);
    out.sup_distance = dist;
    out.constant = dist * static_cast<double>(n);
    out.slope_floor_active = floor_active;
    return out;
}

}  // namespace tightmech
