// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "naive_mv/analysis.hpp"

using namespace naive_mv;

namespace {

// 50-digit references from tests/oracles/closed_forms.py
constexpr double kGamma0 = 2.114375623731966168;
constexpr double kNaiveWeightCase1 = 1.6087622718813247186;
constexpr double kNaiveWeightCase2 = 0.53075903362015723938;
constexpr double kRegularWeightCase1 = 1.4446385611565483778;
constexpr double kGrowth0 = 1.114375623731966168;
constexpr double kNaiveMean = 1.11988365950510680602;
constexpr double kFrontierVariance = 0.094174283705210357873;

// tolerances
constexpr double kClosedFormRel = 1e-8;
constexpr double kClosedFormSeconds = 1.0;
constexpr double kDominanceSeconds = 10.0;
constexpr double kWeakResidual = 1e-10;
constexpr double kFrontierSeconds = 60.0;
constexpr double kVarianceRel = 0.05;
constexpr double kBands = 3.0;
constexpr double kOdeAbs = 1e-8;
constexpr double kConvergeSeconds = 300.0;
constexpr unsigned kBoundDepth = 6;
constexpr double kEquivalenceAbs = 1e-12;

constexpr std::uint64_t kSeed = 42;
constexpr std::size_t kPaths = 100'000;
constexpr std::size_t kSteps = 4096;
constexpr std::size_t kParallelThreads = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

int failures = 0;

void report(int id, bool pass, const std::string& what) {
    if (!pass) ++failures;
    fmt::print("{} criterion {}: {}\n", pass ? "PASS" : "FAIL", id, what);
    std::fflush(stdout);
}

SimConfig sim_config(std::size_t threads) {
    SimConfig c;
    c.grid = TimeGrid(0.0, 1.0, kSteps);
    c.path_count = kPaths;
    c.seed = kSeed;
    c.threads = threads;
    return c;
}

/// Outputs of criteria 3-7 for one run.
struct StochasticRun {
    PathEnsemble pre;
    PathEnsemble naive;
    ConvergenceReport converge;
    InefficiencyReport pre_gap;
    InefficiencyReport naive_gap;
    double pre_seconds = 0.0;
    double converge_seconds = 0.0;

    std::vector<std::pair<std::string, std::string>> csvs() const {
        return {{"precommitted.csv", pre.summary_csv()},
                {"naive.csv", naive.summary_csv()},
                {"converge.csv", converge.to_csv()},
                {"inefficiency_precommitted.csv", pre_gap.to_csv()},
                {"inefficiency_naive.csv", naive_gap.to_csv()}};
    }
};

StochasticRun run_stochastic(const MarketModel& m, const TargetSpec& t, std::size_t threads) {
    const SimConfig c = sim_config(threads);
    StochasticRun r;
    auto t0 = Clock::now();
    r.pre = simulate_policy_paths(pre_committed_policy(m, t, 0.0, 1.0), 0.0, 1.0, c);
    r.pre_seconds = seconds_since(t0);
    r.naive = simulate_policy_paths(naive_policy(m, t), 0.0, 1.0, c);
    t0 = Clock::now();
    r.converge = convergence_metric({2, 3, 4, 5, 6, 7, 8}, m, t, c);
    r.converge_seconds = seconds_since(t0);
    r.pre_gap = inefficiency_report(m, PolicyKind::PreCommitted, 1.0, r.pre);
    r.naive_gap = inefficiency_report(m, PolicyKind::Naive, 1.0, r.naive);
    return r;
}

void write_csvs(const std::filesystem::path& dir, const StochasticRun& r) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : r.csvs()) std::ofstream(dir / name, std::ios::binary) << text;
}

void criterion1(const MarketModel& m) {
    const auto t0 = Clock::now();
    const BlackScholesParams p{};
    const TargetSpec g1 = growth_factor_of(TargetSpec::case1_alpha(1.0), m);
    struct Item {
        const char* name;
        double value, expect;
    };
    const Item items[] = {
        {"gamma(0)", gamma(m, g1, 0.0), kGamma0},
        {"c_na(0) case 1", naive_weight(p, WeightCase::alpha(1.0), 0.0), kNaiveWeightCase1},
        {"c_na(0) case 2", naive_weight(p, WeightCase::k(0.05), 0.0), kNaiveWeightCase2},
        {"c_re(0) case 1", regular_weight(p, WeightCase::alpha(1.0), 0.0), kRegularWeightCase1},
        {"f(0,T)", static_cast<double>(g1.value(m, 0.0, 1.0)), kGrowth0},
        {"naive mean", expected_terminal_naive_closed(p, 1.0, 1.0), kNaiveMean},
    };
    double worst = 0.0;
    std::string detail;
    for (const Item& it : items) {
        worst = std::max(worst, rel(it.value, it.expect));
        detail += fmt::format("{} = {:.10f}; ", it.name, it.value);
    }
    double re_case2 = 0.0;
    for (int i = 0; i <= 1000; ++i) re_case2 = std::max(re_case2, rel(regular_weight(p, WeightCase::k(0.05), i / 1000.0), 0.5));
    worst = std::max(worst, re_case2);
    const double secs = seconds_since(t0);
    report(1, worst < kClosedFormRel && secs < kClosedFormSeconds,
           fmt::format("{}c_re case 2 = 0.5 on [0,T]; max rel err {:.2e} (< {:.0e}); {:.3f} s", detail, worst,
                       kClosedFormRel, secs));
}

void criterion2() {
    const auto t0 = Clock::now();
    const BlackScholesParams p{};
    const std::vector<WeightCase> cases = {WeightCase::alpha(0.25), WeightCase::alpha(1.0), WeightCase::alpha(4.0),
                                           WeightCase::k(0.03),     WeightCase::k(0.05),    WeightCase::k(0.08)};
    bool ok = true;
    double min_we = INFINITY, min_re = INFINITY, residual = 0.0;
    for (const WeightCase& wc : cases) {
        const DominanceReport r = dominance_report(p, wc, 1001);
        std::size_t interior = 0;
        for (std::size_t i = 1; i + 1 < r.rows.size(); ++i) {
            ++interior;
            ok = ok && r.rows[i].margin_we() > 0.0 && r.rows[i].margin_re() > 0.0;
            min_we = std::min(min_we, r.rows[i].margin_we());
            min_re = std::min(min_re, r.rows[i].margin_re());
        }
        ok = ok && interior == 999;
        residual = std::max(residual, r.solver_residual);
    }
    const double secs = seconds_since(t0);
    report(2, ok && residual < kWeakResidual && secs < kDominanceSeconds,
           fmt::format("6 cases x 999 interior points; min c_na - c_we = {:.3e}, min c_na - c_re = {:.3e}; "
                       "weak residual {:.2e} (< {:.0e}); {:.2f} s",
                       min_we, min_re, residual, kWeakResidual, secs));
}

void criterion3(const StochasticRun& r) {
    const double mean = r.pre.terminal_mean(), se = r.pre.terminal_stderr(), var = r.pre.terminal_variance();
    const bool ok = std::fabs(mean - kGrowth0) <= kBands * se && rel(var, kFrontierVariance) <= kVarianceRel &&
                    r.pre_seconds < kFrontierSeconds;
    report(3, ok,
           fmt::format("pre-committed E X(T) = {:.6f} vs {:.6f} (|diff| {:.2e}, 3 SE {:.2e}); Var = {:.6f} vs {:.6f} "
                       "({:+.2f}%); {:.1f} s",
                       mean, kGrowth0, std::fabs(mean - kGrowth0), kBands * se, var, kFrontierVariance,
                       100.0 * (var / kFrontierVariance - 1.0), r.pre_seconds));
}

void criterion4(const MarketModel& m, const StochasticRun& r) {
    const double closed = expected_terminal_naive_closed(BlackScholesParams{}, 1.0, 1.0);
    const double ode = mean_ode(naive_policy(m, TargetSpec::case1_alpha(1.0)), 0.0, 1.0, TimeGrid(0.0, 1.0, 10'000)).back();
    const double mc = r.naive.terminal_mean(), se = r.naive.terminal_stderr();
    const bool ok = std::fabs(ode - closed) < kOdeAbs && std::fabs(mc - closed) <= kBands * se &&
                    std::fabs(mc - ode) <= kBands * se && rel(closed, kNaiveMean) < kClosedFormRel;
    report(4, ok,
           fmt::format("naive mean: MC {:.6f} (3 SE {:.2e}), ODE {:.12f} (|ODE - closed| {:.1e}), closed {:.12f}", mc,
                       kBands * se, ode, std::fabs(ode - closed), closed));
}

void criterion5(const StochasticRun& r) {
    bool bound_ok = true;
    double worst = -INFINITY;
    std::string dn;
    for (const ConvergenceRow& row : r.converge.rows) {
        bound_ok = bound_ok && row.increment_excess <= 0.0;
        worst = std::max(worst, row.increment_excess);
        dn += fmt::format("{}{:.4g}", dn.empty() ? "" : ", ", row.d_n);
    }
    bool shared = true;
    for (const ConvergenceRow& row : r.converge.rows) shared = shared && row.checksum == r.converge.reference_checksum;
    const bool ok = r.converge.strictly_decreasing() && bound_ok && shared && r.converge_seconds < kConvergeSeconds;
    report(5, ok,
           fmt::format("d_n for n = 2..8: {} (strictly decreasing: {}); common driver: {}; max increment excess over "
                       "bound + 3 SE {:.2e}; {:.1f} s",
                       dn, r.converge.strictly_decreasing() ? "yes" : "no", shared ? "yes" : "no", worst,
                       r.converge_seconds));
}

void criterion6(const StochasticRun& r) {
    const ConvergenceRow* row = nullptr;
    for (const ConvergenceRow& x : r.converge.rows) {
        if (x.n == kBoundDepth) row = &x;
    }
    const bool ok = row && row->second_moment_excess <= 0.0;
    report(6, ok,
           row ? fmt::format("n = {}: max over grid of E X_n(s)^2 - Y(s) - 3 SE = {:.3e}; int E X_n^2 = {:.4f} <= int Y "
                             "= {:.4f}",
                             row->n, row->second_moment_excess, row->second_moment_integral, row->bound_integral)
               : std::string("n = 6 missing"));
}

void criterion7(const StochasticRun& r) {
    const InefficiencyReport& nv = r.naive_gap;
    const InefficiencyReport& pc = r.pre_gap;
    report(7, nv.z > kBands && std::fabs(pc.gap) <= kBands * pc.gap_stderr,
           fmt::format("naive Var {:.6f} vs frontier {:.6f}, gap {:.3e}, z = {:.1f}; pre-committed gap {:.3e} "
                       "(3 SE {:.2e})",
                       nv.variance, nv.frontier, nv.gap, nv.z, pc.gap, kBands * pc.gap_stderr));
}

void criterion8(const MarketModel& m) {
    const EquivalenceReport a = precommit_equivalence_check(m, TargetSpec::case1_alpha(1.0));
    const EquivalenceReport b = precommit_equivalence_check(m, TargetSpec::case2_k(0.05));
    report(8, a.points == 2500 && b.points == 2500 && a.max_abs_diff < kEquivalenceAbs && b.max_abs_diff < kEquivalenceAbs,
           fmt::format("max |gamma_bar - gamma_tilde| on 50 x 50: case 1 {:.2e}, case 2 {:.2e} (< {:.0e})",
                       a.max_abs_diff, b.max_abs_diff, kEquivalenceAbs));
}

void criterion9(const std::filesystem::path& out, const StochasticRun& serial, const MarketModel& m, const TargetSpec& t) {
    write_csvs(out / "serial", serial);
    const StochasticRun repeat = run_stochastic(m, t, 1);
    write_csvs(out / "serial_repeat", repeat);
    const StochasticRun parallel = run_stochastic(m, t, kParallelThreads);
    write_csvs(out / "parallel", parallel);

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    bool ok = true;
    std::size_t compared = 0;
    for (const auto& [name, text] : serial.csvs()) {
        const std::string a = slurp(out / "serial" / name);
        ok = ok && !a.empty() && a == slurp(out / "serial_repeat" / name) && a == slurp(out / "parallel" / name);
        ++compared;
    }
    report(9, ok,
           fmt::format("{} CSVs byte-identical across two serial runs and a {}-thread run (seed {})", compared,
                       kParallelThreads, kSeed));
}

} // namespace

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_out";
    const MarketModel m = MarketModel::black_scholes({});
    const TargetSpec t = TargetSpec::case1_alpha(1.0);

    criterion1(m);
    criterion2();
    const StochasticRun serial = run_stochastic(m, t, 1);
    criterion3(serial);
    criterion4(m, serial);
    criterion5(serial);
    criterion6(serial);
    criterion7(serial);
    criterion8(m);
    criterion9(out, serial, m, t);

    fmt::print("{} of 9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
