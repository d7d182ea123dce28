#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "naive_mv/market_model.hpp"
#include "naive_mv/policies.hpp"
#include "naive_mv/simulation.hpp"

namespace naive_mv {

// ---------------------------------------------------------------------------
// Frontier and closed forms

struct FrontierPoint {
    double s = 0.0;
    double y = 0.0;
    double expected = 0.0;
    double variance = 0.0;
};

/// (E - y e^{int_s^T r})^2 / (e^{int_s^T rho} - 1). Throws DomainError when int rho = 0.
double frontier_variance(const MarketModel& model, double s, double y, double expected);
FrontierPoint frontier_point(const MarketModel& model, double s, double y, double expected);

/// x0 e^{rT} exp{(1/alpha) (rho / (rho - r)) (e^{(rho - r)T} - 1)}, with the exponent
/// rho T / alpha when |rho - r| < 1e-12. Throws DomainError for alpha <= 0.
double expected_terminal_naive_closed(const BlackScholesParams& params, double alpha, double x0);

// ---------------------------------------------------------------------------
// Convergence of the committed processes

/// Maxima over the grid of the coefficient norms in the committed recursion.
struct IncrementConstants {
    double a_star = 0.0; // max |r - rho|^2
    double c_star = 0.0; // max |e^{-int r} rho|^2
    double d_star = 0.0; // max ||F e^{-int r}||^2
    double f_star = 0.0; // max ||F||^2, F = B (sigma sigma^T)^{-1} sigma
    double gamma_star = 0.0;
    double y_terminal = 0.0;

    /// (4T / 2^n)(A* + gamma* C* + gamma* D* + F*) Y(T).
    double bound(double horizon, unsigned n) const;
};

IncrementConstants increment_constants(const MarketModel& model, const TargetSpec& target, const TimeGrid& grid,
                                       const BoundCurve& y_curve);

struct ConvergenceRow {
    unsigned n = 0;
    /// sqrt of the estimate of E int_0^T |X_n - X|^2 dt (trapezoid in t).
    double d_n = 0.0;
    /// Standard error of the d_n^2 estimate.
    double d_n_sq_stderr = 0.0;
    /// max over grid s of the MC estimate of E|X_n(s) - X_n(t_k(s))|^2.
    double increment_mc = 0.0;
    double increment_stderr = 0.0;
    double increment_bound = 0.0;
    /// max over s of increment estimate - bound - 3 SE; <= 0 when the bound holds within MC error.
    double increment_excess = 0.0;
    /// sup_t |E X_n(t) - E X(t)|.
    double mean_distance = 0.0;
    /// Trapezoid integral of the MC estimate of E X_n(t)^2, against int Y.
    double second_moment_integral = 0.0;
    double bound_integral = 0.0;
    /// max over s of E X_n(s)^2 estimate - Y(s) - 3 SE; <= 0 when Y bounds the second moment.
    double second_moment_excess = 0.0;
    /// Increment stream checksum of the committed run.
    std::uint64_t checksum = 0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    IncrementConstants constants;
    /// Checksum of the increments driving the naive reference; equal to every row's checksum.
    std::uint64_t reference_checksum = 0;

    bool strictly_decreasing() const;
    /// n,d_n,increment_mc,increment_bound,increment_stderr,mean_distance,second_moment_integral,bound_integral
    std::string to_csv() const;
};

/// Simulates the naive wealth process (scheme from config) and every X_n for n in ns from the same
/// increments, on config.grid over [0, T] from config.initial_wealth.
ConvergenceReport convergence_metric(const std::vector<unsigned>& ns, const MarketModel& model,
                                     const TargetSpec& target, const SimConfig& config);

// ---------------------------------------------------------------------------
// Inefficiency

struct InefficiencyReport {
    PolicyKind policy = PolicyKind::Naive;
    std::size_t path_count = 0;
    double mean = 0.0;
    double variance = 0.0;
    double mean_stderr = 0.0;
    double frontier = 0.0;
    double gap = 0.0;
    double gap_stderr = 0.0;
    /// gap / gap_stderr; 0 when both vanish.
    double z = 0.0;

    /// Naive: z > 3. Pre-committed and zero: |gap| <= 3 SE.
    bool passed() const;
    /// policy,paths,mean,variance,frontier,gap,gap_stderr,z
    std::string to_csv() const;
};

/// Simulates `kind` (naive, precommitted or zero) from (0, x0) and compares the sample variance
/// of X(T) with the frontier variance at the achieved mean. The gap standard error is by the
/// delta method on (mean, variance).
InefficiencyReport inefficiency_report(const MarketModel& model, const TargetSpec& target, PolicyKind kind,
                                       const SimConfig& config);
/// Same report from an ensemble already simulated from (0, x0) under `kind`.
InefficiencyReport inefficiency_report(const MarketModel& model, PolicyKind kind, double x0,
                                       const PathEnsemble& ensemble);

// ---------------------------------------------------------------------------
// Equivalence of risk-aversion and wealth targets

/// (1/alpha(s,y)) e^{int rho} + e^{int r} y.
extended gamma_bar(const MarketModel& model, const TargetSpec& risk_aversion, extended s, extended y);
/// (L(s,y) - e^{int (r - rho)} y) / (1 - e^{-int rho}).
extended gamma_tilde(const MarketModel& model, const TargetSpec& wealth_target, extended s, extended y);

struct EquivalenceGrid {
    std::size_t s_points = 50;
    std::size_t y_points = 50;
    /// s in [0, s_max_fraction T]
    double s_max_fraction = 0.99;
    double y_min = 0.1;
    double y_max = 10.0;
};

struct EquivalenceReport {
    double max_abs_diff = 0.0;
    double worst_s = 0.0;
    double worst_y = 0.0;
    std::size_t points = 0;
};

/// Converts `spec` with convert_target and compares gamma_bar and gamma_tilde on the grid.
EquivalenceReport precommit_equivalence_check(const MarketModel& model, const TargetSpec& spec,
                                              const EquivalenceGrid& grid = {});
/// Compares an explicit (alpha, L) pair.
EquivalenceReport precommit_equivalence_check(const MarketModel& model, const TargetSpec& risk_aversion,
                                              const TargetSpec& wealth_target, const EquivalenceGrid& grid = {});

} // namespace naive_mv
