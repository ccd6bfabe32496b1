// SPDX-License-Identifier: MIT
//
// Small internal numeric helpers shared by the translation units.
#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace tightmech::detail {

inline constexpr double kInvPhi = 0.6180339887498948482;  // (sqrt(5) - 1) / 2

// Golden-section search for the maximiser of a unimodal f on [a, b], stopping
// when the bracket is narrower than `width`.  Returns (argmax, f(argmax)); the
// bracket endpoints are also compared so a monotone f returns its endpoint.
template <class F>
std::pair<double, double> golden_section_max(F&& f, double a, double b, double width) {
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > width) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    double best = 0.5 * (a + b);
    double fbest = f(best);
    for (double cand : {a, b, c, d}) {
        double v = f(cand);
        if (v > fbest) {
            fbest = v;
            best = cand;
        }
    }
    return {best, fbest};
}

// Trapezoid integral of samples g on the grid x.
inline double trapezoid(const std::vector<double>& x, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (g[i] + g[i - 1]);
    return s;
}

// Index i with x[i] <= t < x[i+1] (clamped to [0, n-2]) on an ascending grid.
inline std::size_t segment_of(const std::vector<double>& x, double t) {
    std::size_t lo = 0;
    std::size_t hi = x.size() - 1;
    if (t <= x.front()) return 0;
    if (t >= x.back()) return x.size() - 2;
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (x[mid] <= t)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

// Linear interpolation of (x, v) at t, clamped to the span.
inline double interpolate(const std::vector<double>& x, const std::vector<double>& v, double t) {
    if (t <= x.front()) return v.front();
    if (t >= x.back()) return v.back();
    std::size_t i = segment_of(x, t);
    double w = (t - x[i]) / (x[i + 1] - x[i]);
    return v[i] + w * (v[i + 1] - v[i]);
}

}  // namespace tightmech::detail
