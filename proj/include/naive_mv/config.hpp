#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "naive_mv/market_model.hpp"
#include "naive_mv/simulation.hpp"

namespace naive_mv {

/// Parsed run configuration.
///
/// Format: one `key = value` per line, `#` starts a comment. Vectors are comma
/// separated, matrix rows separated by `;`. A coefficient becomes piecewise
/// constant when `<key>.breaks` lists interior breakpoints and the value lists
/// one piece per interval separated by `|`:
///
///     risk_free.breaks = 0.5
///     risk_free = 0.02 | 0.03
///
/// Target kinds: case1_alpha (target.alpha), case2_k (target.k), and the generic
/// forms growth_factor f(u,v) = e^{g (v-u)}, wealth_target L(s,y) = y e^{g (T-s)}
/// (both with g = target.rate) and risk_aversion alpha(s,y) = target.alpha / y.
struct RunConfig {
    double horizon = 1.0;
    ScalarCurve risk_free = ScalarCurve::constant(0.02);
    VectorCurve drift = VectorCurve::constant(Eigen::VectorXd::Constant(1, 0.08));
    MatrixCurve volatility = MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, 0.2));
    std::size_t asset_count = 1;

    std::string target_kind = "case1_alpha";
    double alpha = 1.0;
    double k = 0.05;
    double rate = 0.05;

    std::uint64_t seed = 42;
    std::size_t paths = 100'000;
    std::size_t steps = 4096;
    Scheme scheme = Scheme::Euler;
    double initial_wealth = 1.0;
    std::size_t threads = 0;

    /// experiment.* entries by suffix (nmin, nmax, points, case, policy, expected).
    std::map<std::string, std::string> experiment;
    std::string output_dir;

    MarketModel model() const;
    TargetSpec target() const;
    /// Simulation settings on [start, T].
    SimConfig sim(double start = 0.0) const;

    std::optional<std::string> experiment_value(const std::string& key) const;
};

/// Throws ParseError (with the 1-based line) on malformed input or unknown keys.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

} // namespace naive_mv
