// SPDX-License-Identifier: MIT
//
// Economic environment: evidence cost functions with derivatives up to order
// three, the type interval, the principal's funds, and executable checks of
// the maintained assumptions.
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tightmech {

enum class CostFamily { Power, ExpNormalized, Tabulated };

// Evidence cost c on [0,1] with c(0) = c'(0) = 0.
//
//   power(p, s):         c(e) = s * e^p / p
//   exp_normalized(s):   c(e) = s * (exp(e) - e - 1) / (exp(1) - 1)
//   tabulated(e_i, c_i): monotone cubic (PCHIP) interpolation; c'' and c''' by
//                        finite differences, hence flagged approximate.
class CostFunction {
public:
    static CostFunction power(double p, double scale = 1.0);
    static CostFunction exp_normalized(double scale = 1.0);
    static CostFunction tabulated(std::vector<double> nodes, std::vector<double> values);

    [[nodiscard]] double value(double e) const { return derivative(0, e); }
    [[nodiscard]] double d1(double e) const { return derivative(1, e); }
    [[nodiscard]] double d2(double e) const { return derivative(2, e); }
    [[nodiscard]] double d3(double e) const { return derivative(3, e); }
    // Derivative of order k in {0,1,2,3}; e must lie in [0,1] for tabulated
    // costs, parametric families extend naturally beyond.
    [[nodiscard]] double derivative(int k, double e) const;

    // e * c'''(e) / c''(e), with its limit at e = 0 for parametric families.
    // NaN where c'' vanishes.
    [[nodiscard]] double curvature_ratio(double e) const;

    // Same cost multiplied by kappa > 0.
    [[nodiscard]] CostFunction scaled(double kappa) const;

    [[nodiscard]] CostFamily family() const noexcept { return family_; }
    [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }
    [[nodiscard]] bool approximate() const noexcept { return family_ == CostFamily::Tabulated; }
    [[nodiscard]] std::string family_name() const;
    // Interpolation data of a tabulated cost (values include any scaling);
    // empty for parametric families.
    [[nodiscard]] std::vector<double> table_nodes() const;
    [[nodiscard]] std::vector<double> table_values() const;

    // Throws InvariantViolation unless c(0) = c'(0) = 0 and c', c'' > 0 on
    // the interior of a grid with `grid` points.
    void validate(std::size_t grid = 1001) const;

private:
    struct Table;
    CostFamily family_ = CostFamily::Power;
    std::vector<double> params_;  // power: {p, scale}; exp: {scale}; tabulated: {scale}
    std::shared_ptr<const Table> table_;
};

struct Environment {
    double x_lo = 0.0;
    double x_hi = 1.0;
    double tau = 1.0;
    CostFunction c_A = CostFunction::exp_normalized();
    CostFunction c_P_base = CostFunction::power(1.01);
    double kappa = 1.0;

    // c_P = kappa * c_P_base.
    [[nodiscard]] double cP(double e) const { return kappa * c_P_base.value(e); }
    [[nodiscard]] double cP1(double e) const { return kappa * c_P_base.d1(e); }
    [[nodiscard]] double cP2(double e) const { return kappa * c_P_base.d2(e); }

    // Validates bounds, cost invariants and (when `checked`) all assumptions;
    // throws InvariantViolation otherwise.
    static Environment make(double x_lo, double x_hi, double tau, CostFunction c_A,
                            CostFunction c_P, double kappa = 1.0, bool checked = true);
    // [0,1], tau = 1, c_A = exp-normalized, c_P = e^1.01 / 1.01.
    static Environment figure1();
};

// Uniform grid of n >= 2 points on [x_lo, x_hi].
[[nodiscard]] std::vector<double> type_grid(const Environment& env, std::size_t n);

// u_A(e) = e c_A'(e) - c_A(e).  Throws DomainError outside [0,1].
[[nodiscard]] double evidence_rent(const Environment& env, double e_A);
// u_A'(e) = e c_A''(e).
[[nodiscard]] double evidence_rent_derivative(const Environment& env, double e_A);
// u_A''(e) = c_A''(e) + e c_A'''(e).
[[nodiscard]] double evidence_rent_second_derivative(const Environment& env, double e_A);

// argmin_e c_A(e) + (1 - e) c_P(e_P) over [0,1].  Throws DomainError outside [0,1].
[[nodiscard]] double efficient_effort(const Environment& env, double e_P);

struct AssumptionReport {
    bool budget = false;
    bool regularity = false;
    bool rent_regularity = false;
    bool approximate = false;  // a tabulated cost entered the checks
    double regularity_min_slack = 0.0;
    double regularity_boundary_slack = 0.0;  // slack at e_A = 0 (see check_assumptions)
    double rent_regularity_min_slack = 0.0;
    std::string budget_witness;
    std::optional<double> regularity_witness;
    std::optional<double> rent_regularity_witness;
    [[nodiscard]] bool all() const { return budget && regularity && rent_regularity; }
};

// Budget: tau >= c_A'(1) > c_P(1), tested exactly.
// Regularity: (x_lo + tau)/c_P'(1) + e > e(1-e) c_A'''/c_A'' + 1 - e on the
// grid points of (0,1].  At e = 0 the rent form of the condition is 0/0, so
// the endpoint slack is reported in regularity_boundary_slack but not gated.
// Rent regularity: 2 c_A'' + e c_A''' > 0 on the whole grid.
// Strict inequalities require slack >= strict_slack.
[[nodiscard]] AssumptionReport check_assumptions(const Environment& env, std::size_t grid = 1001,
                                                 double strict_slack = 1e-10);

struct GlobalConcavityReport {
    bool concave = false;
    double worst_eigenvalue = 0.0;      // most negative Hessian eigenvalue seen
    int worst_expression = 0;           // 1, 2 or 3
    double min_ee_at_zero = 0.0;        // e_A-e_A entry of expression 1 at e_A = 0
    bool cp_ratio_bounded = false;      // c_P'/c_P'' finite on the grid
    double cp_ratio_max = 0.0;
    std::size_t points = 0;
};

// Scans the Hessians of the three auxiliary cost expressions
//   u_A + c_A + (1-e) c_P((l - y)/(x - y)),
//   c_A + (1-e) c_P((l - y)/(x - y)),
//   c_A + (1-e) c_P((d - u_A)/(x + tau))
// over (x, y, e_A, l or d) with y < x and e_A in [0, e_bar]; all three must be
// convex (so their negatives, the profit expressions, are concave).  c_P is
// extended to negative arguments with constant c_P''(0).
[[nodiscard]] GlobalConcavityReport check_global_concavity(const Environment& env, double e_bar,
                                                           std::size_t grid = 11,
                                                           double tol = 1e-9);

enum class DistributionKind { Uniform, TruncatedExponential, Tabulated };

struct TypeDistribution {
    DistributionKind kind = DistributionKind::Uniform;
    std::vector<double> grid;
    std::vector<double> density;
    std::vector<double> cdf;

    static TypeDistribution uniform(const std::vector<double>& grid);
    // density proportional to exp(-rate (x - x_lo)).
    static TypeDistribution truncated_exponential(const std::vector<double>& grid, double rate);
    // density values are renormalised to integrate to one.
    static TypeDistribution tabulated(const std::vector<double>& grid, std::vector<double> density);

    // Trapezoid weights w_i with sum_i w_i g(y_i) ~ E[g].
    [[nodiscard]] std::vector<double> weights() const;
    [[nodiscard]] double min_density() const;
    // Density by linear interpolation.
    [[nodiscard]] double pdf(double x) const;
};

}  // namespace tightmech
