#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "naive_mv/coefficient_curve.hpp"

namespace naive_mv {

/// Extended precision used for target functions and discount integrals.
/// The (GL) conversion divides by 1 - exp(-int rho), which is small near the
/// horizon; double rounding of L there costs ~1e-12 absolute.
using extended = long double;

/// Single risky asset with constant coefficients.
struct BlackScholesParams {
    double r = 0.02;
    double b = 0.08;
    double sigma = 0.2;
    double horizon = 1.0;

    double excess() const { return b - r; }
    double rho() const { return (b - r) * (b - r) / (sigma * sigma); }
    /// Throws DomainError unless sigma > 0, b > r and horizon > 0.
    void check() const;
};

/// Deterministic complete market on [0, T]: bank rate r, excess returns B (column
/// m-vector, B = b - r 1) and volatility sigma (rows = assets, columns = Brownian
/// components).
class MarketModel {
public:
    /// Simpson panels used over [0, T] when a coefficient has no closed-form integral.
    static constexpr std::size_t kDefaultSimpsonPanels = 10'000;

    MarketModel(double horizon, ScalarCurve risk_free, VectorCurve drift, MatrixCurve volatility,
                std::size_t simpson_panels = kDefaultSimpsonPanels);

    static MarketModel black_scholes(const BlackScholesParams& p);

    double horizon() const { return horizon_; }
    std::size_t asset_count() const { return assets_; }

    double risk_free(double t) const { return risk_free_(t); }
    Eigen::VectorXd drift(double t) const { return drift_(t); }
    Eigen::VectorXd excess_return(double t) const;
    Eigen::MatrixXd volatility(double t) const { return volatility_(t); }
    Eigen::MatrixXd covariance(double t) const;

    /// [sigma sigma^T]^{-1} B(t). Throws AssumptionViolation("A2") when sigma sigma^T is singular.
    Eigen::VectorXd market_direction(double t) const;

    /// sigma^T [sigma sigma^T]^{-1} B(t): the row vector B (sigma sigma^T)^{-1} sigma as a column.
    Eigen::VectorXd diffusion_direction(double t) const;

    /// rho(t) = B^T [sigma sigma^T]^{-1} B.
    double rho(double t) const;

    /// int_a^b r and int_a^b rho. Exact for constant and piecewise-constant coefficients.
    extended integral_r(extended a, extended b) const;
    extended integral_rho(extended a, extended b) const;

    /// Present when m = 1 and every coefficient is constant.
    std::optional<BlackScholesParams> as_black_scholes() const;

    const ScalarCurve& risk_free_curve() const { return risk_free_; }
    const VectorCurve& drift_curve() const { return drift_; }
    const MatrixCurve& volatility_curve() const { return volatility_; }

private:
    std::vector<double> rho_breaks(extended a, extended b) const;

    double horizon_;
    std::size_t assets_;
    ScalarCurve risk_free_;
    VectorCurve drift_;
    MatrixCurve volatility_;
    std::size_t simpson_panels_;
};

/// rho(t) with a domain check on t.
double rho(const MarketModel& model, double t);

/// Two-argument target function: f(u, v), L(s, y) or alpha(s, y).
using TargetFunction = std::function<extended(extended, extended)>;

/// Expected-return target of the mean-variance problem.
///
/// GrowthFactor carries f(u, v); WealthTarget carries L(s, y); RiskAversion
/// carries alpha(s, y). The built-in cases are the two families used in the
/// single-stock comparisons: alpha(s, y) = alpha / y and L(s, y) = y e^{k(T-s)}.
/// Their values depend on the market (horizon, rho), so evaluation goes through
/// value(model, ., .).
class TargetSpec {
public:
    enum class Kind { GrowthFactor, WealthTarget, RiskAversion };
    enum class Builtin { None, Case1Alpha, Case2K };

    static TargetSpec case1_alpha(double alpha);
    static TargetSpec case2_k(double k);

    /// horizon_only marks an f known only on the slice v = T.
    static TargetSpec growth_factor(TargetFunction f, std::string label,
                                    TargetFunction df_du = {}, bool horizon_only = false);
    static TargetSpec wealth_target(TargetFunction L, std::string label);
    static TargetSpec risk_aversion(TargetFunction alpha, std::string label);

    Kind kind() const { return kind_; }
    Builtin builtin() const { return builtin_; }
    double parameter() const { return parameter_; }
    const std::string& label() const { return label_; }
    bool horizon_only() const { return horizon_only_; }

    extended value(const MarketModel& model, extended a, extended b) const;

    /// d f(u, v) / du for growth factors. Falls back to a one-sided difference
    /// in u when no derivative was supplied.
    extended growth_partial_u(const MarketModel& model, extended u, extended v) const;

private:
    TargetSpec(Kind kind, Builtin builtin, double parameter, TargetFunction fn, TargetFunction dfn,
               std::string label, bool horizon_only);

    Kind kind_;
    Builtin builtin_;
    double parameter_;
    TargetFunction fn_;
    TargetFunction dfn_;
    std::string label_;
    bool horizon_only_;
};

/// Growth factor equivalent of a target. L must be homogeneous of degree one in y
/// (checked by sampling); otherwise throws DomainError.
TargetSpec growth_factor_of(const TargetSpec& target, const MarketModel& model);

/// gamma(s, T) = [f(s,T) - e^{int_s^T (r - rho)}] / [1 - e^{-int_s^T rho}], continuous up to T.
struct GammaOptions {
    /// Relative width (in units of T) of the window near T where the l'Hopital ratio is used.
    double limit_window = 1e-6;
};
double gamma(const MarketModel& model, const TargetSpec& target, double s, GammaOptions opts = {});

struct AssumptionCheck {
    std::string name;    // "A1", "A2", "A3", or a built-in parameter rule
    bool passed = true;
    std::string detail;
    std::optional<double> offending_time;
    std::optional<double> offending_time2;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    /// Smallest eigenvalue of sigma sigma^T found on the grid (the delta of A2).
    double delta = 0.0;
    double min_rho = 0.0;

    bool all_passed() const;
    std::string to_text() const;
};

struct ValidationOptions {
    std::size_t grid_points = 1001;
    /// Sub-grid for the v coordinate of the (u, v) pairs checked in A3.
    std::size_t pair_points = 101;
    double bound = 1e8;
};

ValidationReport validate_assumptions(const MarketModel& model, const TargetSpec& target,
                                      const ValidationOptions& opts = {});

/// (s, y) points on which convert_target checks alpha > 0.
struct ConversionGrid {
    std::size_t time_points = 101;
    std::vector<double> wealths{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
};

/// RiskAversion <-> WealthTarget through
///   e^{int rho} / alpha + y e^{int r} = (L - e^{int (r - rho)} y) / (1 - e^{-int rho}).
TargetSpec convert_target(const TargetSpec& spec, const MarketModel& model,
                          const ConversionGrid& grid = {});

} // namespace naive_mv
