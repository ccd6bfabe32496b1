// SPDX-License-Identifier: MIT
//
// Command-line front end.  Exit codes: 0 success, 1 a verification or
// solver check failed, 2 invalid input (arguments, config or data files).
#include "tightmech/errors.hpp"
#include "tightmech/io.hpp"
#include "tightmech/loss.hpp"
#include "tightmech/mechanism.hpp"
#include "tightmech/model.hpp"
#include "tightmech/optimality.hpp"
#include "tightmech/oracle.hpp"
#include "tightmech/tighten.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace tightmech;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInputError = 2;

struct RunConfig {
    std::string config;            // environment JSON; Figure-1 environment when empty
    std::string loss = "exp";      // CSV path or builtin: exp, identity, debt:<y0>
    std::size_t grid = 501;
    std::string out;               // output path; stdout when empty
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    bool oracle = false;
    double tol_money = 1e-9;
    double tol_foc = 1e-7;
    std::string input;             // mechanism CSV for tighten / classify / verify
    bool derived = false;          // solve: append U, Pi, lambda columns
    std::size_t knots = 16;        // optimize
    std::size_t budget = 2000;     // optimize
    std::size_t count = 10;        // oracle-compare
};

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("tightmech");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("TIGHTMECH_LOG")) {
        const std::string s = lvl;
        if (s == "error")
            spdlog::set_level(spdlog::level::err);
        else if (s == "info")
            spdlog::set_level(spdlog::level::info);
        else if (s == "debug")
            spdlog::set_level(spdlog::level::debug);
        else
            spdlog::warn("TIGHTMECH_LOG must be error, info or debug; got '{}'", s);
    }
}

void emit(const RunConfig& rc, const std::string& content) {
    if (rc.out.empty())
        std::cout << content;
    else
        write_text_file(rc.out, content);
}

Environment load_env(const RunConfig& rc, bool checked = true) {
    if (rc.config.empty()) return Environment::figure1();
    try {
        return load_environment(rc.config, checked);
    } catch (const InvariantViolation& e) {
        throw InputError(rc.config + ": " + e.what());
    }
}

// Builtin losses: "exp" is 1 - exp(-(x - x_lo)) + x_lo (the Figure-1 loss on
// [0,1]), "identity" is λ = x, "debt:<y0>" is min{x, y0}.
LossFunction load_loss_arg(const Environment& env, const RunConfig& rc) {
    const auto grid = type_grid(env, rc.grid);
    const std::string& s = rc.loss;
    if (s == "exp")
        return LossFunction::from_function(
            grid, [&](double x) { return env.x_lo + 1.0 - std::exp(-(x - env.x_lo)); }, LossClass::Lambda, env.tau);
    if (s == "identity") return LossFunction::from_function(grid, [](double x) { return x; }, LossClass::Lambda, env.tau);
    if (s.rfind("debt:", 0) == 0) {
        double y0 = 0.0;
        try {
            y0 = std::stod(s.substr(5));
        } catch (const std::exception&) {
            throw InputError("--loss debt:<y0> needs a number, got '" + s + "'");
        }
        if (!(y0 >= env.x_lo && y0 <= env.x_hi)) throw InputError("--loss debt:<y0> needs y0 in [x_lo, x_hi]");
        return LossFunction::from_function(grid, [y0](double x) { return std::min(x, y0); }, LossClass::Lambda, env.tau);
    }
    return load_loss(s, LossClass::Lambda, env.tau);
}

Mechanism load_input_mechanism(const Environment& env, const RunConfig& rc) {
    Mechanism m = load_mechanism(rc.input);
    if (std::abs(m.y.front() - env.x_lo) > 1e-12 || std::abs(m.y.back() - env.x_hi) > 1e-12)
        throw InputError(rc.input + ": grid must span [x_lo, x_hi] of the environment");
    const std::string bad = m.feasibility_violation(env.tau);
    if (!bad.empty()) throw InputError(rc.input + ": " + bad);
    return m;
}

// Runs fn(i) for i in [0, n) on `jobs` threads with static chunking.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned t = 0; t < jobs; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += jobs) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Mechanism solve_with_oracle(const Environment& env, const LossFunction& lam, unsigned jobs) {
    Mechanism m = Mechanism::zeros(lam.grid(), Provenance::Constructed);
    parallel_for(lam.size(), jobs, [&](std::size_t i) {
        const auto b = brute_force_type(env, lam, lam.grid()[i]);
        m.e_A[i] = b.e_A;
        m.e_P[i] = b.e_P;
        m.r_A[i] = b.r_A;
        m.r_P[i] = b.r_P;
        m.r_empty[i] = b.r_empty;
    });
    m.normalize_never_paid();
    return m;
}

// The loss a given mechanism is tight for: λ̃ of its own induced loss.
LossFunction recovered_loss(const Environment& env, const Mechanism& m) {
    return virtual_loss(env, m, regularize_plus(induced_loss(env, m), env.tau));
}

json partition_to_json(const IntervalPartition& part) { return json::parse(intervals_json(part)); }

// ---------------------------------------------------------------- commands

int cmd_check_env(const RunConfig& rc) {
    const Environment env = load_env(rc, false);
    const AssumptionReport rep = check_assumptions(env);
    json j = {
        {"budget",
         {{"pass", rep.budget}, {"condition", "tau >= c_A'(1) > c_P(1)"}, {"witness", rep.budget_witness}}},
        {"regularity",
         {{"pass", rep.regularity},
          {"condition", "(x_lo + tau)/c_P'(1) + e > e(1-e) c_A'''/c_A'' + 1 - e on (0,1]"},
          {"min_slack", rep.regularity_min_slack},
          {"boundary_slack", rep.regularity_boundary_slack},
          {"witness", rep.regularity_witness ? json(*rep.regularity_witness) : json(nullptr)}}},
        {"rent_regularity",
         {{"pass", rep.rent_regularity},
          {"condition", "2 c_A'' + e c_A''' > 0 on [0,1]"},
          {"min_slack", rep.rent_regularity_min_slack},
          {"witness", rep.rent_regularity_witness ? json(*rep.rent_regularity_witness) : json(nullptr)}}},
        {"approximate", rep.approximate},
        {"all_pass", rep.all()}};
    emit(rc, j.dump(2) + "\n");
    if (!rep.budget) spdlog::error("budget assumption fails: {}", rep.budget_witness);
    if (!rep.regularity) spdlog::error("regularity assumption fails at e_A = {}", rep.regularity_witness.value_or(NAN));
    if (!rep.rent_regularity)
        spdlog::error("rent-regularity assumption fails at e_A = {}", rep.rent_regularity_witness.value_or(NAN));
    return rep.all() ? kOk : kFailed;
}

int cmd_solve(const RunConfig& rc) {
    const Environment env = load_env(rc);
    const LossFunction lam = load_loss_arg(env, rc);
    Mechanism m;
    if (rc.oracle) {
        spdlog::info("solving {} types by brute-force enumeration", lam.size());
        m = solve_with_oracle(env, lam, rc.jobs);
    } else {
        SolveOptions so;
        so.jobs = rc.jobs;
        m = solve_tight(env, lam, so);
    }
    const auto inc = check_incentives(env, m, {rc.tol_money, rc.tol_foc});
    std::ostringstream os;
    if (rc.derived) {
        const DerivedSchedules d = derive(env, m);
        write_mechanism_csv(os, m, &d);
    } else {
        write_mechanism_csv(os, m);
    }
    emit(rc, os.str());
    spdlog::info("solved {} knots; expected profit (uniform) {:.9f}; worst IC slack {:.3g}", m.size(),
                 expected_profit(env, m, TypeDistribution::uniform(m.y)), inc.worst_ic_slack);
    if (!inc.ok()) {
        spdlog::error("solution fails incentive checks (IC ok: {}, obedience ok: {}, first knot {})", inc.ic_ok,
                      inc.obedience_ok,
                      !inc.ic_violations.empty() ? inc.ic_violations.front() : inc.obedience_violations.front());
        return kFailed;
    }
    return kOk;
}

int cmd_tighten(const RunConfig& rc) {
    if (rc.input.empty()) throw InputError("tighten needs an input mechanism CSV");
    const Environment env = load_env(rc);
    const Mechanism in = load_input_mechanism(env, rc);
    const auto inc = check_incentives(env, in, {rc.tol_money, rc.tol_foc});
    if (!inc.ic_ok) {
        std::ostringstream os;
        os << rc.input << ": input is not incentive compatible (worst slack " << inc.worst_ic_slack << " at knot "
           << inc.ic_violations.front() << ")";
        throw InputError(os.str());
    }
    SolveOptions so;
    so.jobs = rc.jobs;
    const TightenResult t = tighten(env, in, so);
    for (const auto& w : t.warnings) spdlog::warn("{}", w);

    const auto pi_in = profit(env, in);
    const auto pi_out = profit(env, t.mech);
    const auto lam_in = induced_loss(env, in);
    const auto lam_out = induced_loss(env, t.mech);
    double min_gain = std::numeric_limits<double>::infinity();
    double min_gain_below_top = std::numeric_limits<double>::infinity();
    double max_gain = -std::numeric_limits<double>::infinity();
    double min_loss_gain = std::numeric_limits<double>::infinity();
    std::size_t worst = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double g = pi_out[i] - pi_in[i];
        if (g < min_gain) {
            min_gain = g;
            worst = i;
        }
        if (t.mech.e_P[i] > 0.0) min_gain_below_top = std::min(min_gain_below_top, g);
        max_gain = std::max(max_gain, g);
        min_loss_gain = std::min(min_loss_gain, lam_out.at(i) - lam_in.at(i));
    }
    const bool ok = min_gain >= -1e-8 && min_loss_gain >= -1e-8;
    const TypeDistribution F = TypeDistribution::uniform(in.y);
    json rep = {{"min_profit_gain", min_gain},
                {"min_profit_gain_below_top", std::isfinite(min_gain_below_top) ? json(min_gain_below_top) : json(nullptr)},
                {"max_profit_gain", max_gain},
                {"min_loss_gain", min_loss_gain},
                {"expected_profit_in", expected_profit(env, in, F)},
                {"expected_profit_out", expected_profit(env, t.mech, F)},
                {"improved", ok},
                {"warnings", t.warnings}};
    std::cerr << rep.dump(2) << "\n";
    std::ostringstream os;
    write_mechanism_csv(os, t.mech);
    emit(rc, os.str());
    if (!ok) {
        spdlog::error("tightened mechanism is worse at knot {} (y = {}): profit gain {}", worst, in.y[worst], min_gain);
        return kFailed;
    }
    return kOk;
}

// Mechanism and loss for classify / verify: the input CSV with its recovered
// (or the given) loss, else a fresh solve of --config/--loss.
std::pair<Mechanism, LossFunction> mechanism_and_loss(const Environment& env, const RunConfig& rc, bool loss_given) {
    if (rc.input.empty()) {
        const LossFunction lam = load_loss_arg(env, rc);
        SolveOptions so;
        so.jobs = rc.jobs;
        return {solve_tight(env, lam, so), lam};
    }
    Mechanism m = load_input_mechanism(env, rc);
    if (loss_given) {
        RunConfig r2 = rc;
        r2.grid = m.size();
        LossFunction lam = load_loss_arg(env, r2);
        return {std::move(m), std::move(lam)};
    }
    LossFunction lam = recovered_loss(env, m);
    return {std::move(m), std::move(lam)};
}

int cmd_classify(const RunConfig& rc, bool loss_given) {
    const Environment env = load_env(rc);
    const auto [m, lam] = mechanism_and_loss(env, rc, loss_given);
    const IntervalPartition part = classify(env, lam, m);
    emit(rc, intervals_json(part));
    if (!part.random_audits()) spdlog::info("no random audits: the five interior intervals are empty");
    return kOk;
}

int cmd_verify(const RunConfig& rc, bool loss_given) {
    const Environment env = load_env(rc);
    std::optional<std::pair<Mechanism, LossFunction>> ml;
    std::string failure;
    try {
        ml = mechanism_and_loss(env, rc, loss_given);
    } catch (const InvariantViolation& e) {
        // The mechanism's own loss is not certifiably concave: not tight.
        failure = std::string("loss recovery: ") + e.what();
    }
    std::ostringstream out;
    bool pass = failure.empty();
    if (ml) {
        const auto& [m, lam] = *ml;
        const auto inc = check_incentives(env, m, {rc.tol_money, rc.tol_foc});
        out << (inc.ic_ok ? "PASS" : "FAIL") << " IC  U >= y - lambda_m at every knot";
        if (!inc.ic_ok) out << "  [knot " << inc.ic_violations.front() << ", worst slack " << inc.worst_ic_slack << "]";
        out << "\n"
            << (inc.obedience_ok ? "PASS" : "FAIL") << " OB  obedience first-order condition";
        if (!inc.obedience_ok)
            out << "  [knot " << inc.obedience_violations.front() << ", worst residual " << inc.worst_obedience_residual
                << "]";
        out << "\n";
        pass = pass && inc.ok();
        try {
            const CharacterizationReport rep = verify_characterization(env, lam, m);
            out << rep.to_text();
            pass = pass && rep.all_pass();
        } catch (const ClassificationAmbiguity& e) {
            out << "FAIL C0  regime labels form consecutive ordered intervals  [" << e.what() << "]\n";
            pass = false;
        }
    } else {
        out << "FAIL LOSS  mechanism's loss lies in the concave class  [" << failure << "]\n";
    }
    emit(rc, out.str());
    return pass ? kOk : kFailed;
}

int cmd_optimize(const RunConfig& rc) {
    const Environment env = load_env(rc);
    const auto grid = type_grid(env, rc.grid);
    const TypeDistribution F = TypeDistribution::uniform(grid);
    OptimizeOptions oo;
    oo.knots = rc.knots;
    oo.budget = rc.budget;
    oo.grid = rc.grid;
    oo.seed = rc.seed;
    oo.jobs = rc.jobs;
    int code = kOk;
    OptimizeResult r;
    try {
        r = optimize_loss(env, F, oo);
    } catch (const BudgetExhausted& e) {
        spdlog::error("{}", e.what());
        r = e.best();
        code = kFailed;
    }
    const DebtBenchmark debt = best_debt(env, F);
    const InteriorEffortChecks ie = interior_effort_checks(env, r.mech);

    // Breakpoints of the piecewise-linear λ (the slope segments).
    json knots = json::array();
    const double h = (env.x_hi - env.x_lo) / static_cast<double>(r.slopes.size());
    for (std::size_t j = 0; j <= r.slopes.size(); ++j) {
        const double x = j == r.slopes.size() ? env.x_hi : env.x_lo + h * static_cast<double>(j);
        knots.push_back(json::array({x, r.lam(x)}));
    }
    const auto& rep = r.report;
    const double foc_max = std::max({rep.residual_SL, rep.residual_M, rep.residual_SH, rep.integral_residual});
    json j = {{"expected_profit", r.expected_profit},
              {"lambda_knots", knots},
              {"slopes", r.slopes},
              {"interval_boundaries", partition_to_json(rep.part)},
              {"foc_max_residual", foc_max},
              {"foc_residuals",
               {{"SL", rep.residual_SL},
                {"M", rep.residual_M},
                {"SH", rep.residual_SH},
                {"SH_selection", rep.residual_SH_selection},
                {"integral", rep.integral_residual},
                {"integral_intervals", rep.integral_intervals},
                {"sup_SL", rep.sup_SL},
                {"inf_selection", rep.inf_selection},
                {"boundary_flag", rep.boundary_flag},
                {"selection_dependent", rep.selection_dependent}}},
              {"interior_effort_checks",
               {{"min_U", ie.min_U}, {"max_e_P", ie.max_eP}, {"min_e_P_interior", ie.min_eP_interior}, {"ok", ie.ok()}}},
              {"debt_benchmark", {{"y0_best", debt.y0_best}, {"profit", debt.profit}}},
              {"evaluations", r.evaluations},
              {"seed", rc.seed}};
    emit(rc, j.dump(2) + "\n");
    spdlog::info("expected profit {:.9f} vs best debt {:.9f} (y0 = {}) after {} inner solves", r.expected_profit,
                 debt.profit, debt.y0_best, r.evaluations);
    return code;
}

int cmd_figure1(const RunConfig& rc) {
    const Environment env = Environment::figure1();
    RunConfig r2 = rc;
    r2.loss = "exp";
    const LossFunction lam = load_loss_arg(env, r2);
    SolveOptions so;
    so.jobs = rc.jobs;
    const Mechanism m = solve_tight(env, lam, so);
    std::ostringstream os;
    os << "y,e_A,e_P,e_A_eff\n";
    for (std::size_t i = 0; i < m.size(); ++i)
        os << format_number(m.y[i]) << ',' << format_number(m.e_A[i]) << ',' << format_number(m.e_P[i]) << ','
           << format_number(efficient_effort(env, m.e_P[i])) << '\n';
    emit(rc, os.str());
    const IntervalPartition part = classify(env, lam, m);
    for (auto reg : {Region::EpOne, Region::SL, Region::L, Region::M, Region::H, Region::SH, Region::EpZero}) {
        const auto& b = part[reg];
        if (b.empty)
            spdlog::info("{:>8}: empty", to_string(reg));
        else
            spdlog::info("{:>8}: [{:.4f}, {:.4f}] ({} knots)", to_string(reg), b.lo, b.hi, b.count());
    }
    return kOk;
}

int cmd_oracle_compare(const RunConfig& rc) {
    const Environment env = load_env(rc);
    const LossFunction lam = load_loss_arg(env, rc);
    std::mt19937_64 rng(rc.seed);
    std::uniform_real_distribution<double> U(env.x_lo, env.x_hi);
    std::vector<double> ys(rc.count);
    for (auto& y : ys) y = U(rng);
    std::sort(ys.begin(), ys.end());
    const OracleConfig cfg;
    const double ep_tol = 2.0 / static_cast<double>(cfg.grid_eP);
    std::vector<std::string> rows(ys.size());
    std::vector<char> ok(ys.size(), 0);
    parallel_for(ys.size(), rc.jobs, [&](std::size_t i) {
        const auto s = solve_type(env, lam, ys[i]);
        const auto b = brute_force_type(env, lam, ys[i], cfg);
        const double gap = s.profit - b.profit;
        const double ep_gap = std::abs(s.e_P_star - b.e_P);
        ok[i] = gap >= -1e-4 && gap <= 1e-4 && ep_gap <= ep_tol;
        std::ostringstream os;
        os << format_number(ys[i]) << ',' << format_number(s.profit) << ',' << format_number(b.profit) << ','
           << format_number(gap) << ',' << format_number(s.e_P_star) << ',' << format_number(b.e_P) << ','
           << format_number(ep_gap) << ',' << (ok[i] ? "pass" : "fail") << '\n';
        rows[i] = os.str();
    });
    std::string out = "y,solver_profit,oracle_profit,profit_gap,solver_e_P,oracle_e_P,e_P_gap,verdict\n";
    for (const auto& r : rows) out += r;
    emit(rc, out);
    return std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; }) ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Solver and verifier for tight surplus-division mechanisms with two-sided costly evidence"};
    app.require_subcommand(1);
    RunConfig rc;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", rc.config, "environment JSON (default: the Figure-1 environment)");
        sub->add_option("--loss", rc.loss, "loss CSV (y,lambda) or builtin: exp, identity, debt:<y0>");
        sub->add_option("--grid", rc.grid, "type grid size N")->check(CLI::Range(std::size_t{51}, std::size_t{1000001}));
        sub->add_option("--out", rc.out, "output path (default: stdout)");
        sub->add_option("--seed", rc.seed, "seed for randomized steps");
        sub->add_option("--jobs", rc.jobs, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_option("--tol-money", rc.tol_money, "IC slack tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--tol-foc", rc.tol_foc, "obedience first-order-condition tolerance")->check(CLI::PositiveNumber);
    };
    auto* check_env = app.add_subcommand("check-env", "check the maintained assumptions; JSON report");
    common(check_env);
    auto* solve = app.add_subcommand("solve", "tight mechanism for a loss function; mechanism CSV");
    common(solve);
    solve->add_flag("--oracle", rc.oracle, "solve every type by brute-force enumeration");
    solve->add_flag("--derived", rc.derived, "append U, Pi, lambda columns");
    auto* tight = app.add_subcommand("tighten", "tighten a feasible IC mechanism; mechanism CSV");
    common(tight);
    tight->add_option("input", rc.input, "mechanism CSV")->required();
    auto* cls = app.add_subcommand("classify", "five-interval partition; intervals JSON");
    common(cls);
    cls->add_option("input", rc.input, "tight mechanism CSV (default: solve --config/--loss)");
    auto* ver = app.add_subcommand("verify", "check the structure of a tight mechanism clause by clause");
    common(ver);
    ver->add_option("input", rc.input, "tight mechanism CSV (default: solve --config/--loss)");
    auto* opt = app.add_subcommand("optimize", "search the loss class for the best tight mechanism; opt.json");
    common(opt);
    opt->add_option("--knots", rc.knots, "slope segments of λ")->check(CLI::Range(std::size_t{1}, std::size_t{256}));
    opt->add_option("--budget", rc.budget, "inner solves");
    auto* fig = app.add_subcommand("figure1", "Figure-1 effort schedules CSV (y,e_A,e_P,e_A_eff)");
    common(fig);
    auto* orc = app.add_subcommand("oracle-compare", "solver vs brute-force oracle at random types");
    common(orc);
    orc->add_option("--count", rc.count, "number of random types")->check(CLI::Range(std::size_t{1}, std::size_t{10000}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    try {
        if (*check_env) return cmd_check_env(rc);
        if (*solve) return cmd_solve(rc);
        if (*tight) return cmd_tighten(rc);
        if (*cls) return cmd_classify(rc, cls->count("--loss") > 0);
        if (*ver) return cmd_verify(rc, ver->count("--loss") > 0);
        if (*opt) return cmd_optimize(rc);
        if (*fig) return cmd_figure1(rc);
        if (*orc) return cmd_oracle_compare(rc);
    } catch (const InputError& e) {
        spdlog::error("{}", e.what());
        return kInputError;
    } catch (const DomainError& e) {
        spdlog::error("{}", e.what());
        return kInputError;
    } catch (const InvariantViolation& e) {
        spdlog::error("{}", e.what());
        return kFailed;
    } catch (const SolverFailure& e) {
        spdlog::error("knot {}: {}", e.knot(), e.what());
        return kFailed;
    } catch (const InfeasibleAtType& e) {
        spdlog::error("y = {}: {}", e.type(), e.what());
        return kFailed;
    } catch (const ClassificationAmbiguity& e) {
        spdlog::error("{}", e.what());
        return kFailed;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFailed;
    }
    return kInputError;
}
