#include "naive_mv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace naive_mv {

double frontier_variance(const MarketModel& model, double s, double y, double expected) {
    const double T = model.horizon();
    if (!(s >= 0.0 && s <= T)) throw DomainError(fmt::format("frontier anchor s = {} outside [0, {}]", s, T));
    const extended P = model.integral_rho(s, T);
    if (!(P > 0.0L)) throw DomainError("frontier undefined: int_s^T rho = 0");
    const extended gap = static_cast<extended>(expected) - static_cast<extended>(y) * std::exp(model.integral_r(s, T));
    return static_cast<double>(gap * gap / std::expm1(P));
}

FrontierPoint frontier_point(const MarketModel& model, double s, double y, double expected) {
    return {s, y, expected, frontier_variance(model, s, y, expected)};
}

double expected_terminal_naive_closed(const BlackScholesParams& params, double alpha, double x0) {
    if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
    params.check();
    const extended r = params.r;
    const extended rho = params.rho();
    const extended T = params.horizon;
    const extended d = rho - r;
    const extended exponent = std::fabs(d) < 1e-12L ? rho * T / alpha : (rho / d) * std::expm1(d * T) / alpha;
    return static_cast<double>(x0 * std::exp(r * T + exponent));
}

// ---------------------------------------------------------------------------

double IncrementConstants::bound(double horizon, unsigned n) const {
    return 4.0 * horizon / std::ldexp(1.0, static_cast<int>(n)) *
           (a_star + gamma_star * c_star + gamma_star * d_star + f_star) * y_terminal;
}

IncrementConstants increment_constants(const MarketModel& model, const TargetSpec& target, const TimeGrid& grid,
                                       const BoundCurve& y_curve) {
    const double T = model.horizon();
    IncrementConstants k;
    k.gamma_star = y_curve.gamma_star;
    k.y_terminal = y_curve.terminal();
    (void)target;
    for (std::size_t i = 0; i < grid.points(); ++i) {
        const double t = grid.time(i);
        const double rho = model.rho(t);
        const double discount = static_cast<double>(std::exp(-model.integral_r(t, T)));
        const double a = model.risk_free(t) - rho;
        const double c = discount * rho;
        const double f2 = model.diffusion_direction(t).squaredNorm();
        k.a_star = std::max(k.a_star, a * a);
        k.c_star = std::max(k.c_star, c * c);
        k.d_star = std::max(k.d_star, f2 * discount * discount);
        k.f_star = std::max(k.f_star, f2);
    }
    return k;
}

bool ConvergenceReport::strictly_decreasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].d_n < rows[i - 1].d_n)) return false;
    }
    return true;
}

std::string ConvergenceReport::to_csv() const {
    std::string out =
        "n,d_n,increment_mc,increment_bound,increment_stderr,mean_distance,second_moment_integral,bound_integral\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.n, r.d_n, r.increment_mc,
                           r.increment_bound, r.increment_stderr, r.mean_distance, r.second_moment_integral,
                           r.bound_integral);
    }
    return out;
}

namespace {

/// Plain per-point sums; blocks are merged in a fixed order so the totals are reproducible.
struct CommittedSums {
    std::vector<double> e2, e4, x, x2, x4;
    double d2 = 0.0, d4 = 0.0;
    std::uint64_t checksum = 0;

    explicit CommittedSums(std::size_t points) : e2(points), e4(points), x(points), x2(points), x4(points) {}

    void add(const CommittedSums& o) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            e2[i] += o.e2[i];
            e4[i] += o.e4[i];
            x[i] += o.x[i];
            x2[i] += o.x2[i];
            x4[i] += o.x4[i];
        }
        d2 += o.d2;
        d4 += o.d4;
        checksum += o.checksum;
    }
};

struct ConvergencePartial {
    std::vector<double> reference;
    std::uint64_t checksum = 0;
    std::vector<CommittedSums> committed;
};

double stderr_of(double sum, double sum_sq, double count) {
    if (count < 2.0) return 0.0;
    const double mean = sum / count;
    const double var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
    return std::sqrt(var / count);
}

} // namespace

ConvergenceReport convergence_metric(const std::vector<unsigned>& ns, const MarketModel& model,
                                     const TargetSpec& target, const SimConfig& config) {
    if (ns.empty()) throw ConfigurationError("convergence study needs at least one n");
    if (config.path_count == 0) throw ConfigurationError("path count must be positive");
    const TimeGrid& grid = config.grid;
    for (unsigned n : ns) grid.require_dyadic(n);

    const double T = model.horizon();
    const double x0 = config.initial_wealth;
    const std::size_t m = model.asset_count();
    const std::size_t points = grid.points();
    const std::size_t steps = grid.steps();
    const double h = grid.step();

    const Policy naive = naive_policy(model, target);
    const AffinePathKernel reference(naive, grid, config.scheme);
    std::vector<CommittedPathKernel> kernels;
    kernels.reserve(ns.size());
    for (unsigned n : ns) kernels.emplace_back(model, target, grid, n);

    ConvergencePartial total{std::vector<double>(points), 0, {}};
    total.committed.assign(ns.size(), CommittedSums(points));

    run_path_blocks<ConvergencePartial>(
        config.path_count, resolve_threads(config.threads),
        [&] {
            ConvergencePartial p{std::vector<double>(points), 0, {}};
            p.committed.assign(ns.size(), CommittedSums(points));
            return p;
        },
        [&](std::size_t first, std::size_t last, ConvergencePartial& part) {
            std::vector<double> dw(steps * m);
            std::vector<double> x(points);
            std::vector<double> xn(points);
            for (std::size_t p = first; p < last; ++p) {
                brownian_increments(config.seed, p, h, m, dw);
                const std::uint64_t hash = increment_hash(dw) ^ (p * 0x9E3779B97F4A7C15ull);
                part.checksum += hash;
                reference.run(x0, dw, x);
                for (std::size_t i = 0; i < points; ++i) part.reference[i] += x[i];
                for (std::size_t k = 0; k < kernels.size(); ++k) {
                    kernels[k].run(x0, dw, xn);
                    CommittedSums& acc = part.committed[k];
                    acc.checksum += hash;
                    const std::size_t stride = kernels[k].stride();
                    double d2 = 0.0;
                    for (std::size_t i = 0; i < points; ++i) {
                        const double e = xn[i] - xn[i - i % stride];
                        const double diff = xn[i] - x[i];
                        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
                        d2 += w * diff * diff;
                        acc.e2[i] += e * e;
                        acc.e4[i] += e * e * e * e;
                        const double sq = xn[i] * xn[i];
                        acc.x[i] += xn[i];
                        acc.x2[i] += sq;
                        acc.x4[i] += sq * sq;
                    }
                    d2 *= h;
                    acc.d2 += d2;
                    acc.d4 += d2 * d2;
                }
            }
        },
        [&](ConvergencePartial&& part) {
            for (std::size_t i = 0; i < points; ++i) total.reference[i] += part.reference[i];
            total.checksum += part.checksum;
            for (std::size_t k = 0; k < ns.size(); ++k) total.committed[k].add(part.committed[k]);
        });

    ConvergenceReport report;
    report.reference_checksum = total.checksum;
    const BoundCurve y_curve = bound_curve_Y(model, target, grid, x0);
    report.constants = increment_constants(model, target, grid, y_curve);
    const double M = static_cast<double>(config.path_count);
    const double y_integral = y_curve.integral();

    for (std::size_t k = 0; k < ns.size(); ++k) {
        const CommittedSums& acc = total.committed[k];
        ConvergenceRow row;
        row.n = ns[k];
        row.checksum = acc.checksum;
        row.d_n = std::sqrt(acc.d2 / M);
        row.d_n_sq_stderr = stderr_of(acc.d2, acc.d4, M);
        row.increment_bound = report.constants.bound(T, ns[k]);
        row.increment_excess = -std::numeric_limits<double>::infinity();
        row.second_moment_excess = -std::numeric_limits<double>::infinity();
        double m2_integral = 0.0;
        for (std::size_t i = 0; i < points; ++i) {
            const double e2 = acc.e2[i] / M;
            const double e2_se = stderr_of(acc.e2[i], acc.e4[i], M);
            if (e2 > row.increment_mc) {
                row.increment_mc = e2;
                row.increment_stderr = e2_se;
            }
            row.increment_excess = std::max(row.increment_excess, e2 - row.increment_bound - 3.0 * e2_se);

            const double m2 = acc.x2[i] / M;
            const double m2_se = stderr_of(acc.x2[i], acc.x4[i], M);
            row.second_moment_excess = std::max(row.second_moment_excess, m2 - y_curve.values[i] - 3.0 * m2_se);
            const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
            m2_integral += w * m2;

            row.mean_distance = std::max(row.mean_distance, std::fabs(acc.x[i] / M - total.reference[i] / M));
        }
        row.second_moment_integral = m2_integral * h;
        row.bound_integral = y_integral;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------

bool InefficiencyReport::passed() const {
    if (policy == PolicyKind::Naive) return z > 3.0;
    // floor for rounding when the terminal wealth is deterministic
    const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * mean * mean;
    return std::fabs(gap) <= 3.0 * gap_stderr + rounding;
}

std::string InefficiencyReport::to_csv() const {
    return fmt::format("policy,paths,mean,variance,frontier,gap,gap_stderr,z\n{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       to_string(policy), path_count, mean, variance, frontier, gap, gap_stderr, z);
}

InefficiencyReport inefficiency_report(const MarketModel& model, const TargetSpec& target, PolicyKind kind,
                                       const SimConfig& config) {
    const double x0 = config.initial_wealth;
    Policy policy = [&] {
        switch (kind) {
        case PolicyKind::Naive: return naive_policy(model, target);
        case PolicyKind::PreCommitted: return pre_committed_policy(model, target, 0.0, x0);
        case PolicyKind::Zero: return zero_policy(model);
        default: throw UnsupportedError(fmt::format("inefficiency report does not support policy '{}'", to_string(kind)));
        }
    }();
    return inefficiency_report(model, kind, x0, simulate_policy_paths(policy, 0.0, x0, config));
}

InefficiencyReport inefficiency_report(const MarketModel& model, PolicyKind kind, double x0,
                                       const PathEnsemble& ens) {
    const double T = model.horizon();
    InefficiencyReport rep;
    rep.policy = kind;
    rep.path_count = ens.path_count;
    rep.mean = ens.terminal_mean();
    rep.variance = ens.terminal_variance();
    rep.mean_stderr = ens.terminal_stderr();
    rep.frontier = frontier_variance(model, 0.0, x0, rep.mean);
    rep.gap = rep.variance - rep.frontier;

    // influence of (X - mu)^2 - V - w (X - mu), w = dV*/dE
    const double M = static_cast<double>(ens.path_count);
    const double P = static_cast<double>(model.integral_rho(0.0, T));
    const double w = 2.0 * (rep.mean - x0 * static_cast<double>(std::exp(model.integral_r(0.0, T)))) / std::expm1(P);
    double acc = 0.0;
    for (double x : ens.terminal) {
        const double c = x - rep.mean;
        const double psi = c * c - rep.variance - w * c;
        acc += psi * psi;
    }
    rep.gap_stderr = M > 1.0 ? std::sqrt(acc / (M - 1.0) / M) : 0.0;
    rep.z = rep.gap_stderr > 0.0 ? rep.gap / rep.gap_stderr : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------

extended gamma_bar(const MarketModel& model, const TargetSpec& risk_aversion, extended s, extended y) {
    const extended T = model.horizon();
    return std::exp(model.integral_rho(s, T)) / risk_aversion.value(model, s, y) +
           std::exp(model.integral_r(s, T)) * y;
}

extended gamma_tilde(const MarketModel& model, const TargetSpec& wealth_target, extended s, extended y) {
    const extended T = model.horizon();
    const extended P = model.integral_rho(s, T);
    const extended R = model.integral_r(s, T);
    return (wealth_target.value(model, s, y) - std::exp(R - P) * y) / -std::expm1(-P);
}

EquivalenceReport precommit_equivalence_check(const MarketModel& model, const TargetSpec& spec,
                                              const EquivalenceGrid& grid) {
    const TargetSpec other = convert_target(spec, model);
    if (spec.kind() == TargetSpec::Kind::RiskAversion) return precommit_equivalence_check(model, spec, other, grid);
    return precommit_equivalence_check(model, other, spec, grid);
}

EquivalenceReport precommit_equivalence_check(const MarketModel& model, const TargetSpec& risk_aversion,
                                              const TargetSpec& wealth_target, const EquivalenceGrid& grid) {
    using Kind = TargetSpec::Kind;
    if (risk_aversion.kind() != Kind::RiskAversion || wealth_target.kind() != Kind::WealthTarget) {
        throw DomainError("equivalence check needs a risk-aversion and a wealth-target specification");
    }
    const double T = model.horizon();
    EquivalenceReport rep;
    const std::size_t ns = std::max<std::size_t>(grid.s_points, 2);
    const std::size_t ny = std::max<std::size_t>(grid.y_points, 2);
    for (std::size_t i = 0; i < ns; ++i) {
        const double s = grid.s_max_fraction * T * static_cast<double>(i) / static_cast<double>(ns - 1);
        for (std::size_t j = 0; j < ny; ++j) {
            const double y = grid.y_min + (grid.y_max - grid.y_min) * static_cast<double>(j) / static_cast<double>(ny - 1);
            const double diff = static_cast<double>(
                std::fabs(gamma_bar(model, risk_aversion, s, y) - gamma_tilde(model, wealth_target, s, y)));
            if (!(diff <= rep.max_abs_diff)) {
                rep.max_abs_diff = diff;
                rep.worst_s = s;
                rep.worst_y = y;
            }
            ++rep.points;
        }
    }
    return rep;
}

} // namespace naive_mv
