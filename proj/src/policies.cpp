#include "naive_mv/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace naive_mv {

// ---------------------------------------------------------------------------
// RiskyWeightCurve

RiskyWeightCurve::RiskyWeightCurve(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.empty() || times_.size() != values_.size()) {
        throw DomainError("weight curve needs matching, non-empty time and value arrays");
    }
    if (!std::is_sorted(times_.begin(), times_.end()) ||
        std::adjacent_find(times_.begin(), times_.end()) != times_.end()) {
        throw DomainError("weight curve times must be strictly increasing");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw DomainError("weight curve values must be finite");
    }
}

RiskyWeightCurve RiskyWeightCurve::sample(std::span<const double> times, const std::function<double(double)>& c) {
    std::vector<double> v(times.size());
    std::transform(times.begin(), times.end(), v.begin(), c);
    return RiskyWeightCurve({times.begin(), times.end()}, std::move(v));
}

double RiskyWeightCurve::operator()(double t) const {
    if (times_.size() == 1 || t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto i = static_cast<std::size_t>(it - times_.begin());
    const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
    return values_[i - 1] + w * (values_[i] - values_[i - 1]);
}

// ---------------------------------------------------------------------------
// Policy

const char* to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::PreCommitted: return "precommitted";
    case PolicyKind::Naive: return "naive";
    case PolicyKind::WeakEquilibrium: return "weak";
    case PolicyKind::RegularEquilibrium: return "regular";
    case PolicyKind::Zero: return "zero";
    case PolicyKind::CustomWeight: return "custom_weight";
    case PolicyKind::Custom: return "custom";
    }
    return "unknown";
}

void Policy::check_time(double t) const {
    const double T = model_->horizon();
    const double lo = kind_ == PolicyKind::PreCommitted ? anchor_s_ : 0.0;
    const double slack = 1e-12 * T;
    if (t < lo - slack) {
        if (kind_ == PolicyKind::PreCommitted) {
            throw DomainError(fmt::format("pre-committed policy anchored at s = {} evaluated at t = {} < s",
                                          anchor_s_, t));
        }
        throw DomainError(fmt::format("policy evaluated at t = {} < 0", t));
    }
    if (t > T + slack) throw DomainError(fmt::format("policy evaluated at t = {} > T = {}", t, T));
}

AffineFeedback Policy::affine(double t) const {
    check_time(t);
    const std::size_t m = model_->asset_count();
    AffineFeedback fb{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m)),
                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))};
    const double T = model_->horizon();
    switch (kind_) {
    case PolicyKind::Zero:
        break;
    case PolicyKind::PreCommitted: {
        const Eigen::VectorXd dir = model_->market_direction(t);
        const double discount = static_cast<double>(std::exp(-model_->integral_r(t, T)));
        fb.slope = -dir;
        fb.offset = dir * (anchor_gamma_ * discount * anchor_y_);
        break;
    }
    case PolicyKind::Naive: {
        const Eigen::VectorXd dir = model_->market_direction(t);
        const double discount = static_cast<double>(std::exp(-model_->integral_r(t, T)));
        fb.slope = -dir * (1.0 - gamma(*model_, *growth_, t) * discount);
        break;
    }
    case PolicyKind::WeakEquilibrium:
    case PolicyKind::RegularEquilibrium:
    case PolicyKind::CustomWeight:
        fb.slope(0) = (*weight_)(t);
        break;
    case PolicyKind::Custom:
        throw UnsupportedError("custom policy '" + custom_name_ + "' has no affine feedback form");
    }
    return fb;
}

Eigen::VectorXd Policy::portfolio(double t, double x) const {
    if (kind_ == PolicyKind::Custom) {
        check_time(t);
        return custom_(t, x);
    }
    const AffineFeedback fb = affine(t);
    return fb.slope * x + fb.offset;
}

std::optional<std::pair<double, double>> Policy::anchor() const {
    if (kind_ != PolicyKind::PreCommitted) return std::nullopt;
    return std::pair{anchor_s_, anchor_y_};
}

Policy pre_committed_policy(const MarketModel& model, const TargetSpec& target, double s, double y) {
    if (!(s >= 0.0 && s < model.horizon())) {
        throw DomainError(fmt::format("pre-committed anchor s = {} must lie in [0, T)", s));
    }
    Policy p(PolicyKind::PreCommitted, std::make_shared<const MarketModel>(model));
    p.growth_ = std::make_shared<const TargetSpec>(growth_factor_of(target, model));
    p.anchor_s_ = s;
    p.anchor_y_ = y;
    p.anchor_gamma_ = gamma(model, *p.growth_, s);
    return p;
}

Policy naive_policy(const MarketModel& model, const TargetSpec& target) {
    Policy p(PolicyKind::Naive, std::make_shared<const MarketModel>(model));
    p.growth_ = std::make_shared<const TargetSpec>(growth_factor_of(target, model));
    return p;
}

Policy zero_policy(const MarketModel& model) {
    return Policy(PolicyKind::Zero, std::make_shared<const MarketModel>(model));
}

Policy weight_policy(const MarketModel& model, PolicyKind kind, RiskyWeightCurve curve) {
    if (kind != PolicyKind::WeakEquilibrium && kind != PolicyKind::RegularEquilibrium &&
        kind != PolicyKind::CustomWeight) {
        throw DomainError("weight_policy kind must be weak, regular or custom_weight");
    }
    if (model.asset_count() != 1) throw DomainError("risky-weight policies need a single risky asset");
    Policy p(kind, std::make_shared<const MarketModel>(model));
    p.weight_ = std::move(curve);
    return p;
}

Policy custom_policy(const MarketModel& model, std::function<Eigen::VectorXd(double, double)> portfolio,
                     std::string name) {
    Policy p(PolicyKind::Custom, std::make_shared<const MarketModel>(model));
    p.custom_ = std::move(portfolio);
    p.custom_name_ = std::move(name);
    return p;
}

// ---------------------------------------------------------------------------
// Risky weights

TargetSpec WeightCase::target() const {
    return family == Family::Alpha ? TargetSpec::case1_alpha(parameter) : TargetSpec::case2_k(parameter);
}

void WeightCase::check(const BlackScholesParams& params) const {
    params.check();
    if (family == Family::Alpha && !(parameter > 0.0)) {
        throw DomainError(fmt::format("risk aversion alpha = {} must be positive", parameter));
    }
    if (family == Family::K && !(parameter > params.r)) {
        throw DomainError(fmt::format("target rate k = {} must exceed r = {} (k > r)", parameter, params.r));
    }
}

namespace {

double time_to_go(const BlackScholesParams& p, double t) {
    const double slack = 1e-12 * p.horizon;
    if (!(t >= -slack && t <= p.horizon + slack)) {
        throw DomainError(fmt::format("t = {} outside [0, {}]", t, p.horizon));
    }
    return std::clamp(p.horizon - t, 0.0, p.horizon);
}

} // namespace

double naive_weight(const BlackScholesParams& params, const WeightCase& wc, double t, WeightOptions opts) {
    wc.check(params);
    const double tau = time_to_go(params, t);
    const double rho = params.rho();
    const double s2 = params.sigma * params.sigma;
    if (wc.family == WeightCase::Family::Alpha) {
        return params.excess() / (wc.parameter * s2) * std::exp((rho - params.r) * tau);
    }
    const double k = wc.parameter;
    if (tau < opts.limit_window * params.horizon) return (k - params.r) / params.excess();
    return params.excess() / s2 * std::expm1((k - params.r) * tau) / -std::expm1(-rho * tau);
}

double regular_weight(const BlackScholesParams& params, const WeightCase& wc, double t) {
    wc.check(params);
    const double tau = time_to_go(params, t);
    if (wc.family == WeightCase::Family::K) return (wc.parameter - params.r) / params.excess();
    const double rho = params.rho();
    const double r = params.r;
    const double psi = (r + (rho - r) * std::exp(rho * tau)) / (wc.parameter * std::exp(r * tau) + std::expm1(rho * tau));
    return psi / params.excess();
}

double weak_equation_coefficient(const BlackScholesParams& params, const WeightCase& wc, double t,
                                 WeightOptions opts) {
    wc.check(params);
    const double tau = time_to_go(params, t);
    if (wc.family == WeightCase::Family::Alpha) return wc.parameter;
    const double rho = params.rho();
    const double k = wc.parameter;
    if (tau < opts.limit_window * params.horizon) return rho / (k - params.r);
    // phi = (e^{rho tau} - 1) / (e^{k tau} - e^{r tau})
    return std::expm1(rho * tau) / (std::exp(params.r * tau) * std::expm1((k - params.r) * tau));
}

FixedPointResult picard_solve(std::vector<double> initial,
                              const std::function<void(std::span<const double>, std::span<double>)>& op,
                              const FixedPointOptions& opts) {
    if (!(opts.tolerance > 0.0)) throw DomainError("fixed-point tolerance must be positive");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");

    FixedPointResult res;
    res.final_damping = opts.damping;
    std::vector<double> x = std::move(initial);
    std::vector<double> gx(x.size());
    double theta = opts.damping;
    double previous = std::numeric_limits<double>::infinity();

    for (std::size_t it = 0; it <= opts.max_iterations; ++it) {
        op(x, gx);
        double residual = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = std::fabs(gx[i] - x[i]);
            residual = std::isfinite(d) ? std::max(residual, d) : std::numeric_limits<double>::infinity();
        }
        res.residual_history.push_back(residual);
        res.iterations = it;
        res.residual = residual;
        if (residual < opts.tolerance) {
            res.solution = std::move(x);
            res.final_damping = theta;
            return res;
        }
        if (!std::isfinite(residual) || it == opts.max_iterations) break;
        if (it >= opts.monotone_after && residual > previous && theta > opts.min_damping) {
            theta = std::max(opts.min_damping, theta * 0.5);
            ++res.damping_reductions;
        }
        previous = residual;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1.0 - theta) * x[i] + theta * gx[i];
    }
    throw ConvergenceError(fmt::format("Picard iteration did not converge: residual {:.3e} after {} iterations",
                                       res.residual, res.iterations),
                           res.residual, res.iterations);
}

void weak_weight_rhs(const BlackScholesParams& params, const WeightCase& wc, std::span<const double> times,
                     std::span<const double> c, std::span<double> out) {
    const std::size_t n = times.size();
    const double r = params.r;
    const double ex = params.excess();
    const double s2 = params.sigma * params.sigma;
    // running integrals from t_i to T
    double full = 0.0;
    double quad = 0.0;
    for (std::size_t idx = n; idx-- > 0;) {
        if (idx + 1 < n) {
            const double h = times[idx + 1] - times[idx];
            const double g0 = r + ex * c[idx] + s2 * c[idx] * c[idx];
            const double g1 = r + ex * c[idx + 1] + s2 * c[idx + 1] * c[idx + 1];
            full += 0.5 * h * (g0 + g1);
            quad += 0.5 * h * s2 * (c[idx] * c[idx] + c[idx + 1] * c[idx + 1]);
        }
        const double a = weak_equation_coefficient(params, wc, times[idx]);
        out[idx] = ex / (a * s2) * (std::exp(-full) + a * std::exp(-quad) - a);
    }
}

WeakWeightSolution weak_weight_solve(const BlackScholesParams& params, const WeightCase& wc, const TimeGrid& grid,
                                     const FixedPointOptions& opts, std::optional<std::vector<double>> initial) {
    wc.check(params);
    const double T = params.horizon;
    if (std::fabs(grid.start()) > 1e-12 * T || std::fabs(grid.end() - T) > 1e-12 * T) {
        throw ConfigurationError("weak-equilibrium grid must cover [0, T]");
    }
    const std::vector<double> times = grid.times();
    const double terminal =
        params.excess() / (weak_equation_coefficient(params, wc, T) * params.sigma * params.sigma);
    std::vector<double> start = initial ? std::move(*initial) : std::vector<double>(times.size(), terminal);
    if (start.size() != times.size()) throw ConfigurationError("initial weight curve does not match the grid");

    auto op = [&](std::span<const double> c, std::span<double> out) { weak_weight_rhs(params, wc, times, c, out); };
    FixedPointResult fp = picard_solve(std::move(start), op, opts);
    // one undamped step: pins c(T) to its closed form and only shrinks the residual of a contraction
    std::vector<double> polished(times.size());
    op(fp.solution, polished);
    std::vector<double> image(times.size());
    op(polished, image);
    double residual = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) residual = std::max(residual, std::fabs(image[i] - polished[i]));
    if (residual <= fp.residual) {
        fp.solution = std::move(polished);
        fp.residual = residual;
    }
    RiskyWeightCurve curve(times, fp.solution);
    return {std::move(curve), std::move(fp)};
}

std::string DominanceReport::to_csv() const {
    std::string out = "t,c_na,c_we,c_re,margin_we,margin_re\n";
    for (const auto& row : rows) {
        out += fmt::format("{:.10g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", row.t, row.c_na, row.c_we, row.c_re,
                           row.margin_we(), row.margin_re());
    }
    return out;
}

DominanceReport dominance_report(const BlackScholesParams& params, const WeightCase& wc, std::size_t points,
                                 const DominanceOptions& opts) {
    if (points == 0) throw ConfigurationError("dominance report needs at least one point");
    wc.check(params);
    const double T = params.horizon;
    const std::size_t intervals = points > 1 ? points - 1 : 1;
    const std::size_t refine = std::max<std::size_t>(1, (opts.min_solver_steps + intervals - 1) / intervals);
    const TimeGrid solver_grid(0.0, T, intervals * refine);
    const WeakWeightSolution we = weak_weight_solve(params, wc, solver_grid, opts.solver);

    DominanceReport rep;
    rep.solver_residual = we.solver.residual;
    rep.solver_iterations = we.solver.iterations;
    rep.solver_steps = solver_grid.steps();
    rep.min_margin_we = std::numeric_limits<double>::infinity();
    rep.min_margin_re = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i) {
        const std::size_t node = i * refine;
        DominanceRow row;
        row.t = solver_grid.time(node);
        row.c_na = naive_weight(params, wc, row.t);
        row.c_we = we.curve.values()[node];
        row.c_re = regular_weight(params, wc, row.t);
        if (row.t < T) {
            rep.min_margin_we = std::min(rep.min_margin_we, row.margin_we());
            rep.min_margin_re = std::min(rep.min_margin_re, row.margin_re());
            rep.we_dominated = rep.we_dominated && row.margin_we() > 0.0;
            rep.re_dominated = rep.re_dominated && row.margin_re() > 0.0;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace naive_mv
