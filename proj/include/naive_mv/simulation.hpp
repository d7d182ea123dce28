#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "naive_mv/market_model.hpp"
#include "naive_mv/policies.hpp"
#include "naive_mv/time_grid.hpp"

namespace naive_mv {

enum class Scheme { Euler, ExactLog };

const char* to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct SimConfig {
    TimeGrid grid{0.0, 1.0, 4096};
    std::size_t path_count = 100'000;
    std::uint64_t seed = 42;
    Scheme scheme = Scheme::Euler;
    double initial_wealth = 1.0;
    /// 0 selects hardware concurrency; NAIVE_MV_THREADS caps either choice.
    std::size_t threads = 0;
    /// Keep every path (row-major, path x point). Off by default: 10^5 x 4097 doubles is 3.3 GB.
    bool store_paths = false;
};

/// Worker count after applying the NAIVE_MV_THREADS cap.
std::size_t resolve_threads(std::size_t requested);

/// Cross-sectional statistics per grid time.
struct GridStatistics {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> second_moment;
    /// Unbiased sample variance.
    std::vector<double> variance;
    /// Standard error of the mean.
    std::vector<double> stderr_mean;
    /// Standard error of the second-moment estimate.
    std::vector<double> stderr_second_moment;
};

struct PathEnsemble {
    TimeGrid grid{0.0, 1.0, 1};
    std::uint64_t seed = 0;
    std::size_t path_count = 0;
    GridStatistics stats;
    /// X(T) by path index.
    std::vector<double> terminal;
    /// Row-major [path][point], empty unless SimConfig::store_paths.
    std::vector<double> paths;
    /// Order-independent hash of every Brownian increment consumed. Equal
    /// checksums mean the ensembles were driven by the same increments.
    std::uint64_t increment_checksum = 0;

    double terminal_mean() const { return stats.mean.back(); }
    double terminal_variance() const { return stats.variance.back(); }
    double terminal_stderr() const { return stats.stderr_mean.back(); }

    /// t,mean,second_moment,variance,stderr
    std::string summary_csv() const;

    /// Little-endian dump: 8-byte magic "NMVPATH1", uint64 steps N, uint64 path count,
    /// then path-major rows of N + 1 doubles. Requires stored paths.
    void write_binary(std::ostream& os) const;
};

/// Reads a dump written by PathEnsemble::write_binary: {steps, path count, values}.
struct PathDump {
    std::uint64_t steps = 0;
    std::uint64_t path_count = 0;
    std::vector<double> values;
};
PathDump read_path_dump(std::istream& is);

// ---------------------------------------------------------------------------
// Building blocks shared by the simulators and the convergence study

/// Paths per work unit. Fixed so that reductions do not depend on the thread count.
inline constexpr std::size_t kPathsPerBlock = 512;

/// Brownian increments of one path: out[j * m + c] = sqrt(h) Z for step j, component c,
/// drawn from NormalStream(seed, path).
void brownian_increments(std::uint64_t seed, std::uint64_t path, double h, std::size_t components,
                         std::span<double> out);

/// FNV-1a over the bit patterns of an increment buffer.
std::uint64_t increment_hash(std::span<const double> increments);

/// Runs process(first, last, partial) over fixed-size blocks of paths on a worker pool
/// and hands every partial to merge() in block order.
template <typename Partial>
void run_path_blocks(std::size_t path_count, std::size_t threads, const std::function<Partial()>& make,
                     const std::function<void(std::size_t, std::size_t, Partial&)>& process,
                     const std::function<void(Partial&&)>& merge);

/// Per-step coefficients of dX = (a X + d) dt + (g X + q) . dW generated by an affine policy.
class AffinePathKernel {
public:
    AffinePathKernel(const Policy& policy, const TimeGrid& grid, Scheme scheme);

    /// Fills path (grid.points() values) from X(t_0) = x0.
    void run(double x0, std::span<const double> increments, std::span<double> path) const;

    std::size_t components() const { return m_; }

    /// Exact expectation of the discrete scheme at every grid point from x0: what the
    /// Monte Carlo mean estimates without sampling error. Euler: m <- m + (a m + d) h;
    /// exact_log: m <- m exp(a_mid h).
    std::vector<double> scheme_mean(double x0) const;

private:
    Scheme scheme_;
    std::size_t m_;
    std::vector<double> h_;
    std::vector<double> a_, d_, g_, q_;
    // midpoint log-drift and volatility for the exact lognormal step
    std::vector<double> log_drift_, log_vol_;
    std::vector<double> mid_drift_;
};

/// Wealth of the agent who re-solves the pre-committed problem at t_k = kT/2^n
/// and follows it until t_{k+1}; the anchor X(t_k) is frozen on each interval.
class CommittedPathKernel {
public:
    CommittedPathKernel(const MarketModel& model, const TargetSpec& target, const TimeGrid& grid, unsigned n);

    void run(double x0, std::span<const double> increments, std::span<double> path) const;

    std::size_t components() const { return m_; }
    std::size_t stride() const { return stride_; }

private:
    std::size_t m_;
    std::size_t stride_;
    std::vector<double> h_;
    std::vector<double> a_, c_, f_, d_;
    std::vector<double> gamma_;
};

// ---------------------------------------------------------------------------
// Simulators

/// Euler-Maruyama (or exact lognormal steps for linear policies) for the wealth
/// equation under `policy` from X(s) = y. config.grid must start at s and end at T.
PathEnsemble simulate_policy_paths(const Policy& policy, double s, double y, const SimConfig& config);

/// Pasted 2^{-n}-committed wealth process from (0, config.initial_wealth), Euler steps.
/// Consumes the same increments as simulate_policy_paths with the same seed and grid.
PathEnsemble simulate_committed_2n(unsigned n, const MarketModel& model, const TargetSpec& target,
                                   const SimConfig& config);

// ---------------------------------------------------------------------------
// Moment ODEs

struct MomentCurves {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> second_moment;

    double variance(std::size_t i) const { return second_moment[i] - mean[i] * mean[i]; }
};

/// RK4 on the first two moments of the affine wealth SDE from X(s) = y.
/// Throws UnsupportedError for non-affine policies.
MomentCurves moment_odes(const Policy& policy, double s, double y, const TimeGrid& grid);

std::vector<double> mean_ode(const Policy& policy, double s, double y, const TimeGrid& grid);
std::vector<double> second_moment_ode(const Policy& policy, double s, double y, const TimeGrid& grid);

/// Deterministic bound Y on the second moments of the committed processes:
/// dY = [R* + (gamma*)^2 e^{-2 int_t^T r} rho(t)] Y dt with Y(0) = x0^2.
struct BoundCurve {
    std::vector<double> times;
    std::vector<double> values;
    double r_star = 0.0;
    double gamma_star = 0.0;

    double terminal() const { return values.back(); }
    /// Trapezoid integral of Y over the grid.
    double integral() const;
};

BoundCurve bound_curve_Y(const MarketModel& model, const TargetSpec& target, const TimeGrid& grid, double x0);

} // namespace naive_mv

#include "naive_mv/detail/path_blocks.hpp"
