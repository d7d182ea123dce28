#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "naive_mv/market_model.hpp"
#include "naive_mv/time_grid.hpp"

namespace naive_mv {

/// Risky weight c(t) sampled on an ordered grid covering [0, T], linearly interpolated.
class RiskyWeightCurve {
public:
    RiskyWeightCurve(std::vector<double> times, std::vector<double> values);

    static RiskyWeightCurve sample(std::span<const double> times, const std::function<double(double)>& c);

    double operator()(double t) const;

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

enum class PolicyKind { PreCommitted, Naive, WeakEquilibrium, RegularEquilibrium, Zero, CustomWeight, Custom };

const char* to_string(PolicyKind kind);

/// portfolio(t, x) = slope(t) x + offset(t), m-vectors of dollar amounts.
struct AffineFeedback {
    Eigen::VectorXd slope;
    Eigen::VectorXd offset;
};

/// Deterministic feedback map (t, x) -> portfolio in R^m.
///
/// Every built-in kind is affine in wealth; all but PreCommitted are linear and
/// anchor-free. Custom wraps an arbitrary map and supports Euler simulation only.
class Policy {
public:
    PolicyKind kind() const { return kind_; }
    std::string name() const { return to_string(kind_); }
    const MarketModel& model() const { return *model_; }

    Eigen::VectorXd portfolio(double t, double x) const;

    /// Throws UnsupportedError for Custom policies.
    AffineFeedback affine(double t) const;

    bool is_affine() const { return kind_ != PolicyKind::Custom; }
    /// Linear in wealth, so portfolio(t, 0) = 0.
    bool is_linear() const { return is_affine() && kind_ != PolicyKind::PreCommitted; }

    /// (s, y) for pre-committed policies.
    std::optional<std::pair<double, double>> anchor() const;

    /// The weight curve behind equilibrium and custom-weight policies.
    const RiskyWeightCurve* weight_curve() const { return weight_ ? &*weight_ : nullptr; }

    friend Policy pre_committed_policy(const MarketModel&, const TargetSpec&, double, double);
    friend Policy naive_policy(const MarketModel&, const TargetSpec&);
    friend Policy zero_policy(const MarketModel&);
    friend Policy weight_policy(const MarketModel&, PolicyKind, RiskyWeightCurve);
    friend Policy custom_policy(const MarketModel&, std::function<Eigen::VectorXd(double, double)>, std::string);

private:
    explicit Policy(PolicyKind kind, std::shared_ptr<const MarketModel> model) : kind_(kind), model_(std::move(model)) {}

    void check_time(double t) const;

    PolicyKind kind_;
    std::shared_ptr<const MarketModel> model_;
    std::shared_ptr<const TargetSpec> growth_;
    double anchor_s_ = 0.0;
    double anchor_y_ = 0.0;
    double anchor_gamma_ = 0.0;
    std::optional<RiskyWeightCurve> weight_;
    std::function<Eigen::VectorXd(double, double)> custom_;
    std::string custom_name_;
};

/// -[sigma sigma^T]^{-1} B(t) [x - gamma(s) e^{-int_t^T r} y] on t in [s, T].
Policy pre_committed_policy(const MarketModel& model, const TargetSpec& target, double s, double y);

/// -[sigma sigma^T]^{-1} B(t) [1 - gamma(t) e^{-int_t^T r}] x on [0, T] x R.
Policy naive_policy(const MarketModel& model, const TargetSpec& target);

Policy zero_policy(const MarketModel& model);

/// c(t) x in the single risky asset. kind is WeakEquilibrium, RegularEquilibrium or CustomWeight.
Policy weight_policy(const MarketModel& model, PolicyKind kind, RiskyWeightCurve curve);

/// Arbitrary feedback map; simulated by Euler only.
Policy custom_policy(const MarketModel& model, std::function<Eigen::VectorXd(double, double)> portfolio,
                     std::string name);

// ---------------------------------------------------------------------------
// Single-stock risky weights

/// Target family of the single-stock comparison: alpha(s,y) = alpha/y or L(s,y) = y e^{k(T-s)}.
struct WeightCase {
    enum class Family { Alpha, K };
    Family family = Family::Alpha;
    double parameter = 1.0;

    static WeightCase alpha(double a) { return {Family::Alpha, a}; }
    static WeightCase k(double k) { return {Family::K, k}; }

    TargetSpec target() const;
    /// Throws DomainError for alpha <= 0 or k <= r.
    void check(const BlackScholesParams& params) const;
};

struct WeightOptions {
    /// Width (units of T) of the window near T where the closed-form limit is substituted.
    double limit_window = 1e-6;
};

/// Naive risky weight c_na(t).
double naive_weight(const BlackScholesParams& params, const WeightCase& wc, double t, WeightOptions opts = {});

/// Regular-equilibrium risky weight c_re(t).
double regular_weight(const BlackScholesParams& params, const WeightCase& wc, double t);

/// Risk-aversion coefficient a(t) of the weak-equilibrium equation: alpha, or phi(t) for the k family.
double weak_equation_coefficient(const BlackScholesParams& params, const WeightCase& wc, double t,
                                 WeightOptions opts = {});

struct FixedPointOptions {
    double tolerance = 1e-10;
    std::size_t max_iterations = 20'000;
    /// theta in c <- (1 - theta) c + theta RHS(c).
    double damping = 0.5;
    /// Residuals are expected to decrease from this iteration on; an increase halves theta.
    std::size_t monotone_after = 5;
    double min_damping = 1.0 / 64.0;
};

struct FixedPointResult {
    std::vector<double> solution;
    double residual = 0.0;
    std::size_t iterations = 0;
    double final_damping = 0.0;
    std::size_t damping_reductions = 0;
    std::vector<double> residual_history;
};

/// Damped Picard iteration for x = G(x) in the sup norm. Throws ConvergenceError.
FixedPointResult picard_solve(std::vector<double> initial,
                              const std::function<void(std::span<const double>, std::span<double>)>& op,
                              const FixedPointOptions& opts);

/// Right-hand side of the weak-equilibrium integral equation on a grid, integrals
/// by the trapezoid rule accumulated backward from T.
void weak_weight_rhs(const BlackScholesParams& params, const WeightCase& wc, std::span<const double> times,
                     std::span<const double> c, std::span<double> out);

struct WeakWeightSolution {
    RiskyWeightCurve curve;
    FixedPointResult solver;
};

/// Solves the weak-equilibrium integral equation for c_we on grid. Without an
/// initial curve, starts from the constant c(T).
WeakWeightSolution weak_weight_solve(const BlackScholesParams& params, const WeightCase& wc, const TimeGrid& grid,
                                     const FixedPointOptions& opts = {},
                                     std::optional<std::vector<double>> initial = std::nullopt);

struct DominanceRow {
    double t = 0.0;
    double c_na = 0.0;
    double c_we = 0.0;
    double c_re = 0.0;
    double margin_we() const { return c_na - c_we; }
    double margin_re() const { return c_na - c_re; }
};

struct DominanceReport {
    std::vector<DominanceRow> rows;
    /// Strict positivity over rows with t < T.
    bool we_dominated = true;
    bool re_dominated = true;
    double min_margin_we = 0.0;
    double min_margin_re = 0.0;
    double solver_residual = 0.0;
    std::size_t solver_iterations = 0;
    std::size_t solver_steps = 0;

    bool dominated() const { return we_dominated && re_dominated; }
    /// t,c_na,c_we,c_re,margin_we,margin_re
    std::string to_csv() const;
};

struct DominanceOptions {
    /// The weak-equilibrium solve runs on a refinement of the report grid with at least this many steps.
    std::size_t min_solver_steps = 2000;
    FixedPointOptions solver{};
};

/// Weights of all three policies at `points` uniform times on [0, T] (points = 1 gives t = 0 only).
DominanceReport dominance_report(const BlackScholesParams& params, const WeightCase& wc, std::size_t points,
                                 const DominanceOptions& opts = {});

} // namespace naive_mv
