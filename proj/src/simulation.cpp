#include "naive_mv/simulation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "naive_mv/rng.hpp"

namespace naive_mv {

const char* to_string(Scheme scheme) {
    return scheme == Scheme::Euler ? "euler" : "exact_log";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "euler") return Scheme::Euler;
    if (name == "exact_log") return Scheme::ExactLog;
    throw ConfigurationError("unknown scheme '" + name + "' (expected euler or exact_log)");
}

std::size_t resolve_threads(std::size_t requested) {
    std::size_t n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("NAIVE_MV_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(cap, &end, 10);
        if (end != cap && v > 0) n = std::min<std::size_t>(n, v);
    }
    return n;
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

void check_grid_span(const TimeGrid& grid, double s, double T, const char* what) {
    const double tol = 1e-12 * T;
    if (std::fabs(grid.start() - s) > tol) {
        throw ConfigurationError(fmt::format("{}: grid starts at {} but the initial time is {}", what, grid.start(), s));
    }
    if (std::fabs(grid.end() - T) > tol) {
        throw ConfigurationError(fmt::format("{}: grid ends at {} but the horizon is {}", what, grid.end(), T));
    }
}

/// Welford/Chan accumulation of X and X^2 per grid point.
struct GridWelford {
    std::size_t n = 0;
    std::vector<double> mean, m2, sq_mean, sq_m2;

    explicit GridWelford(std::size_t points) : mean(points, 0.0), m2(points, 0.0), sq_mean(points, 0.0), sq_m2(points, 0.0) {}

    void add(std::span<const double> x) {
        ++n;
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - mean[i];
            mean[i] += d * inv;
            m2[i] += d * (x[i] - mean[i]);
            const double sq = x[i] * x[i];
            const double ds = sq - sq_mean[i];
            sq_mean[i] += ds * inv;
            sq_m2[i] += ds * (sq - sq_mean[i]);
        }
    }

    void merge(const GridWelford& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double tot = na + nb;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double d = o.mean[i] - mean[i];
            mean[i] += d * (nb / tot);
            m2[i] += o.m2[i] + d * d * (na * nb / tot);
            const double ds = o.sq_mean[i] - sq_mean[i];
            sq_mean[i] += ds * (nb / tot);
            sq_m2[i] += o.sq_m2[i] + ds * ds * (na * nb / tot);
        }
        n += o.n;
    }

    GridStatistics finish(std::vector<double> times) const {
        GridStatistics st;
        st.times = std::move(times);
        st.mean = mean;
        st.second_moment = sq_mean;
        const std::size_t p = mean.size();
        st.variance.assign(p, 0.0);
        st.stderr_mean.assign(p, 0.0);
        st.stderr_second_moment.assign(p, 0.0);
        if (n > 1) {
            const double dn = static_cast<double>(n);
            for (std::size_t i = 0; i < p; ++i) {
                st.variance[i] = m2[i] / (dn - 1.0);
                st.stderr_mean[i] = std::sqrt(st.variance[i] / dn);
                st.stderr_second_moment[i] = std::sqrt(sq_m2[i] / (dn - 1.0) / dn);
            }
        }
        return st;
    }
};

struct EnsemblePartial {
    GridWelford stats;
    std::size_t first = 0;
    std::vector<double> terminal;
    std::uint64_t checksum = 0;
};

using PathRunner = std::function<void(double x0, std::span<const double> dw, std::span<double> path)>;

PathEnsemble run_ensemble(const SimConfig& config, std::size_t components, double x0, const PathRunner& runner) {
    if (config.path_count == 0) throw ConfigurationError("path count must be positive");
    const TimeGrid& grid = config.grid;
    const std::size_t points = grid.points();
    const std::size_t steps = grid.steps();
    const double h = grid.step();

    PathEnsemble ens;
    ens.grid = grid;
    ens.seed = config.seed;
    ens.path_count = config.path_count;
    ens.terminal.assign(config.path_count, 0.0);
    if (config.store_paths) {
        if (static_cast<double>(config.path_count) * static_cast<double>(points) > 4.0e8) {
            throw ConfigurationError("refusing to store more than 4e8 path values; lower paths or steps");
        }
        ens.paths.assign(config.path_count * points, 0.0);
    }

    GridWelford total(points);
    run_path_blocks<EnsemblePartial>(
        config.path_count, resolve_threads(config.threads),
        [&] { return EnsemblePartial{GridWelford(points), 0, {}, 0}; },
        [&](std::size_t first, std::size_t last, EnsemblePartial& part) {
            part.first = first;
            part.terminal.reserve(last - first);
            std::vector<double> dw(steps * components);
            std::vector<double> path(points);
            for (std::size_t p = first; p < last; ++p) {
                brownian_increments(config.seed, p, h, components, dw);
                part.checksum += increment_hash(dw) ^ (p * 0x9E3779B97F4A7C15ull);
                runner(x0, dw, path);
                part.stats.add(path);
                part.terminal.push_back(path.back());
                if (!ens.paths.empty()) std::copy(path.begin(), path.end(), ens.paths.begin() + p * points);
            }
        },
        [&](EnsemblePartial&& part) {
            total.merge(part.stats);
            std::copy(part.terminal.begin(), part.terminal.end(), ens.terminal.begin() + part.first);
            ens.increment_checksum += part.checksum;
        });
    ens.stats = total.finish(grid.times());
    return ens;
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError(0, "truncated path dump");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
}

constexpr char kDumpMagic[8] = {'N', 'M', 'V', 'P', 'A', 'T', 'H', '1'};

} // namespace

void brownian_increments(std::uint64_t seed, std::uint64_t path, double h, std::size_t components,
                         std::span<double> out) {
    (void)components;
    NormalStream(seed, path).fill(0, out);
    const double scale = std::sqrt(h);
    for (double& z : out) z *= scale;
}

std::uint64_t increment_hash(std::span<const double> increments) {
    std::uint64_t hsh = kFnvOffset;
    for (double v : increments) {
        hsh ^= std::bit_cast<std::uint64_t>(v);
        hsh *= kFnvPrime;
    }
    return hsh;
}

std::string PathEnsemble::summary_csv() const {
    std::string out = "t,mean,second_moment,variance,stderr\n";
    for (std::size_t i = 0; i < stats.times.size(); ++i) {
        out += fmt::format("{:.10g},{:.17g},{:.17g},{:.17g},{:.17g}\n", stats.times[i], stats.mean[i],
                           stats.second_moment[i], stats.variance[i], stats.stderr_mean[i]);
    }
    return out;
}

void PathEnsemble::write_binary(std::ostream& os) const {
    if (paths.empty()) throw ConfigurationError("ensemble was simulated without store_paths");
    os.write(kDumpMagic, sizeof kDumpMagic);
    put_u64(os, grid.steps());
    put_u64(os, path_count);
    for (double v : paths) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

PathDump read_path_dump(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kDumpMagic, 8) != 0) throw ParseError(0, "not a path dump");
    PathDump d;
    d.steps = get_u64(is);
    d.path_count = get_u64(is);
    d.values.resize(static_cast<std::size_t>((d.steps + 1) * d.path_count));
    for (double& v : d.values) v = std::bit_cast<double>(get_u64(is));
    return d;
}

// ---------------------------------------------------------------------------
// Kernels

AffinePathKernel::AffinePathKernel(const Policy& policy, const TimeGrid& grid, Scheme scheme)
    : scheme_(scheme), m_(policy.model().asset_count()) {
    if (!policy.is_affine()) throw UnsupportedError("policy '" + policy.name() + "' is not affine in wealth");
    if (scheme == Scheme::ExactLog && !policy.is_linear()) {
        throw ConfigurationError("exact_log needs a policy linear in wealth; '" + policy.name() + "' is affine");
    }
    const MarketModel& model = policy.model();
    const std::size_t steps = grid.steps();
    h_.resize(steps);
    a_.resize(steps);
    d_.resize(steps);
    g_.resize(steps * m_);
    q_.resize(steps * m_);
    if (scheme == Scheme::ExactLog) {
        log_drift_.resize(steps);
        log_vol_.resize(steps * m_);
        mid_drift_.resize(steps);
    }
    for (std::size_t j = 0; j < steps; ++j) {
        const double t = grid.time(j);
        const double t1 = grid.time(j + 1);
        h_[j] = t1 - t;
        const AffineFeedback fb = policy.affine(t);
        const Eigen::VectorXd B = model.excess_return(t);
        const Eigen::MatrixXd sig = model.volatility(t);
        a_[j] = model.risk_free(t) + B.dot(fb.slope);
        d_[j] = B.dot(fb.offset);
        const Eigen::VectorXd g = sig.transpose() * fb.slope;
        const Eigen::VectorXd q = sig.transpose() * fb.offset;
        for (std::size_t c = 0; c < m_; ++c) {
            g_[j * m_ + c] = g(static_cast<Eigen::Index>(c));
            q_[j * m_ + c] = q(static_cast<Eigen::Index>(c));
        }
        if (scheme == Scheme::ExactLog) {
            const double tm = 0.5 * (t + t1);
            const AffineFeedback mid = policy.affine(tm);
            const Eigen::VectorXd bm = model.volatility(tm).transpose() * mid.slope;
            mid_drift_[j] = model.risk_free(tm) + model.excess_return(tm).dot(mid.slope);
            log_drift_[j] = mid_drift_[j] - 0.5 * bm.squaredNorm();
            for (std::size_t c = 0; c < m_; ++c) log_vol_[j * m_ + c] = bm(static_cast<Eigen::Index>(c));
        }
    }
}

void AffinePathKernel::run(double x0, std::span<const double> dw, std::span<double> path) const {
    const std::size_t steps = h_.size();
    double x = x0;
    path[0] = x;
    if (scheme_ == Scheme::ExactLog) {
        for (std::size_t j = 0; j < steps; ++j) {
            double e = log_drift_[j] * h_[j];
            for (std::size_t c = 0; c < m_; ++c) e += log_vol_[j * m_ + c] * dw[j * m_ + c];
            x *= std::exp(e);
            path[j + 1] = x;
        }
        return;
    }
    for (std::size_t j = 0; j < steps; ++j) {
        double dx = (a_[j] * x + d_[j]) * h_[j];
        for (std::size_t c = 0; c < m_; ++c) dx += (g_[j * m_ + c] * x + q_[j * m_ + c]) * dw[j * m_ + c];
        x += dx;
        path[j + 1] = x;
    }
}

std::vector<double> AffinePathKernel::scheme_mean(double x0) const {
    std::vector<double> out(h_.size() + 1);
    double m = x0;
    out[0] = m;
    for (std::size_t j = 0; j < h_.size(); ++j) {
        m = scheme_ == Scheme::ExactLog ? m * std::exp(mid_drift_[j] * h_[j]) : m + (a_[j] * m + d_[j]) * h_[j];
        out[j + 1] = m;
    }
    return out;
}

CommittedPathKernel::CommittedPathKernel(const MarketModel& model, const TargetSpec& target, const TimeGrid& grid,
                                         unsigned n)
    : m_(model.asset_count()) {
    check_grid_span(grid, 0.0, model.horizon(), "2^-n committed process");
    grid.require_dyadic(n);
    const std::size_t steps = grid.steps();
    stride_ = steps >> n;
    const double T = model.horizon();
    const TargetSpec growth = growth_factor_of(target, model);
    h_.resize(steps);
    a_.resize(steps);
    c_.resize(steps);
    f_.resize(steps * m_);
    d_.resize(steps * m_);
    for (std::size_t j = 0; j < steps; ++j) {
        const double t = grid.time(j);
        h_[j] = grid.time(j + 1) - t;
        const double rho = model.rho(t);
        const double discount = static_cast<double>(std::exp(-model.integral_r(t, T)));
        a_[j] = model.risk_free(t) - rho;
        c_[j] = discount * rho;
        const Eigen::VectorXd F = model.diffusion_direction(t);
        for (std::size_t c = 0; c < m_; ++c) {
            f_[j * m_ + c] = F(static_cast<Eigen::Index>(c));
            d_[j * m_ + c] = F(static_cast<Eigen::Index>(c)) * discount;
        }
    }
    const std::size_t intervals = std::size_t{1} << n;
    gamma_.resize(intervals);
    for (std::size_t k = 0; k < intervals; ++k) gamma_[k] = gamma(model, growth, grid.time(k * stride_));
}

void CommittedPathKernel::run(double x0, std::span<const double> dw, std::span<double> path) const {
    const std::size_t steps = h_.size();
    double x = x0;
    double anchor = x0;
    double g = gamma_[0];
    path[0] = x;
    for (std::size_t j = 0; j < steps; ++j) {
        if (j % stride_ == 0) {
            anchor = x;
            g = gamma_[j / stride_];
        }
        const double target = g * anchor;
        double dx = (a_[j] * x + c_[j] * target) * h_[j];
        for (std::size_t c = 0; c < m_; ++c) dx += (-f_[j * m_ + c] * x + d_[j * m_ + c] * target) * dw[j * m_ + c];
        x += dx;
        path[j + 1] = x;
    }
}

// ---------------------------------------------------------------------------
// Simulators

PathEnsemble simulate_policy_paths(const Policy& policy, double s, double y, const SimConfig& config) {
    const MarketModel& model = policy.model();
    check_grid_span(config.grid, s, model.horizon(), "simulate_policy_paths");
    const std::size_t m = model.asset_count();

    if (policy.is_affine()) {
        const AffinePathKernel kernel(policy, config.grid, config.scheme);
        return run_ensemble(config, m, y, [&](double x0, std::span<const double> dw, std::span<double> path) {
            kernel.run(x0, dw, path);
        });
    }

    if (config.scheme == Scheme::ExactLog) {
        throw ConfigurationError("exact_log needs a policy linear in wealth; '" + policy.name() + "' is not");
    }
    const TimeGrid& grid = config.grid;
    const std::size_t steps = grid.steps();
    std::vector<double> r(steps);
    std::vector<Eigen::VectorXd> B(steps);
    std::vector<Eigen::MatrixXd> sigma(steps);
    for (std::size_t j = 0; j < steps; ++j) {
        const double t = grid.time(j);
        r[j] = model.risk_free(t);
        B[j] = model.excess_return(t);
        sigma[j] = model.volatility(t);
    }
    return run_ensemble(config, m, y, [&](double x0, std::span<const double> dw, std::span<double> path) {
        double x = x0;
        path[0] = x;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = grid.time(j);
            const double h = grid.time(j + 1) - t;
            const Eigen::VectorXd pi = policy.portfolio(t, x);
            const Eigen::VectorXd vol = sigma[j].transpose() * pi;
            double dx = (r[j] * x + B[j].dot(pi)) * h;
            for (std::size_t c = 0; c < m; ++c) dx += vol(static_cast<Eigen::Index>(c)) * dw[j * m + c];
            x += dx;
            path[j + 1] = x;
        }
    });
}

PathEnsemble simulate_committed_2n(unsigned n, const MarketModel& model, const TargetSpec& target,
                                   const SimConfig& config) {
    const CommittedPathKernel kernel(model, target, config.grid, n);
    return run_ensemble(config, model.asset_count(), config.initial_wealth,
                        [&](double x0, std::span<const double> dw, std::span<double> path) { kernel.run(x0, dw, path); });
}

// ---------------------------------------------------------------------------
// Moment ODEs

MomentCurves moment_odes(const Policy& policy, double s, double y, const TimeGrid& grid) {
    if (!policy.is_affine()) {
        throw UnsupportedError("moment ODEs need an affine policy; '" + policy.name() + "' is not");
    }
    const MarketModel& model = policy.model();
    check_grid_span(grid, s, model.horizon(), "moment_odes");

    struct Coeff {
        double a, d, gg, gq, qq;
    };
    auto coeff = [&](double t) {
        const AffineFeedback fb = policy.affine(t);
        const Eigen::VectorXd B = model.excess_return(t);
        const Eigen::MatrixXd sig = model.volatility(t);
        const Eigen::VectorXd g = sig.transpose() * fb.slope;
        const Eigen::VectorXd q = sig.transpose() * fb.offset;
        return Coeff{model.risk_free(t) + B.dot(fb.slope), B.dot(fb.offset), g.squaredNorm(), g.dot(q), q.squaredNorm()};
    };
    // d/dt (m1, m2) for dX = (aX + d)dt + (gX + q).dW
    auto rhs = [](const Coeff& k, double m1, double m2) {
        return std::pair{k.a * m1 + k.d, 2.0 * (k.a * m2 + k.d * m1) + k.gg * m2 + 2.0 * k.gq * m1 + k.qq};
    };

    MomentCurves out;
    out.times = grid.times();
    out.mean.resize(grid.points());
    out.second_moment.resize(grid.points());
    double m1 = y;
    double m2 = y * y;
    out.mean[0] = m1;
    out.second_moment[0] = m2;
    Coeff left = coeff(grid.time(0));
    for (std::size_t j = 0; j < grid.steps(); ++j) {
        const double t0 = grid.time(j);
        const double t1 = grid.time(j + 1);
        const double h = t1 - t0;
        const Coeff mid = coeff(0.5 * (t0 + t1));
        const Coeff right = coeff(t1);
        const auto k1 = rhs(left, m1, m2);
        const auto k2 = rhs(mid, m1 + 0.5 * h * k1.first, m2 + 0.5 * h * k1.second);
        const auto k3 = rhs(mid, m1 + 0.5 * h * k2.first, m2 + 0.5 * h * k2.second);
        const auto k4 = rhs(right, m1 + h * k3.first, m2 + h * k3.second);
        m1 += h / 6.0 * (k1.first + 2.0 * k2.first + 2.0 * k3.first + k4.first);
        m2 += h / 6.0 * (k1.second + 2.0 * k2.second + 2.0 * k3.second + k4.second);
        out.mean[j + 1] = m1;
        out.second_moment[j + 1] = m2;
        left = right;
    }
    return out;
}

std::vector<double> mean_ode(const Policy& policy, double s, double y, const TimeGrid& grid) {
    return moment_odes(policy, s, y, grid).mean;
}

std::vector<double> second_moment_ode(const Policy& policy, double s, double y, const TimeGrid& grid) {
    return moment_odes(policy, s, y, grid).second_moment;
}

double BoundCurve::integral() const {
    double acc = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
    return acc;
}

BoundCurve bound_curve_Y(const MarketModel& model, const TargetSpec& target, const TimeGrid& grid, double x0) {
    check_grid_span(grid, 0.0, model.horizon(), "bound_curve_Y");
    const double T = model.horizon();
    const TargetSpec growth = growth_factor_of(target, model);
    BoundCurve out;
    out.times = grid.times();
    for (double t : out.times) {
        out.r_star = std::max(out.r_star, std::fabs(2.0 * model.risk_free(t) - model.rho(t)));
        out.gamma_star = std::max(out.gamma_star, gamma(model, growth, t));
    }
    const double g2 = out.gamma_star * out.gamma_star;
    auto rate = [&](double t) {
        return out.r_star + g2 * static_cast<double>(std::exp(-2.0L * model.integral_r(t, T))) * model.rho(t);
    };
    out.values.resize(out.times.size());
    out.values[0] = x0 * x0;
    double exponent = 0.0;
    double left = rate(out.times[0]);
    for (std::size_t j = 1; j < out.times.size(); ++j) {
        const double t0 = out.times[j - 1];
        const double t1 = out.times[j];
        const double right = rate(t1);
        exponent += (t1 - t0) / 6.0 * (left + 4.0 * rate(0.5 * (t0 + t1)) + right);
        out.values[j] = x0 * x0 * std::exp(exponent);
        left = right;
    }
    return out;
}

} // namespace naive_mv
