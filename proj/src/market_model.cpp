#include "naive_mv/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <fmt/format.h>

namespace naive_mv {

namespace {

constexpr double kTimeSlack = 1e-12;

void check_time(const MarketModel& model, double t, const char* what) {
    if (!(t >= -kTimeSlack * model.horizon() && t <= model.horizon() * (1.0 + kTimeSlack))) {
        throw DomainError(fmt::format("{}: t = {} outside [0, {}]", what, t, model.horizon()));
    }
}

} // namespace

void BlackScholesParams::check() const {
    if (!(sigma > 0.0)) throw DomainError("Black-Scholes volatility must be positive");
    if (!(b > r)) throw DomainError("Black-Scholes drift must exceed the risk-free rate (b > r)");
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
}

MarketModel::MarketModel(double horizon, ScalarCurve risk_free, VectorCurve drift,
                         MatrixCurve volatility, std::size_t simpson_panels)
    : horizon_(horizon),
      assets_(0),
      risk_free_(std::move(risk_free)),
      drift_(std::move(drift)),
      volatility_(std::move(volatility)),
      simpson_panels_(std::max<std::size_t>(2, simpson_panels)) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
        throw DomainError("horizon must be a positive finite number");
    }
    const Eigen::VectorXd b0 = drift_(0.0);
    const Eigen::MatrixXd s0 = volatility_(0.0);
    assets_ = static_cast<std::size_t>(b0.size());
    if (assets_ == 0) throw DomainError("market needs at least one risky asset");
    if (s0.rows() != b0.size() || s0.cols() != b0.size()) {
        throw DomainError(fmt::format("volatility must be {0}x{0} to match the drift vector", assets_));
    }
}

MarketModel MarketModel::black_scholes(const BlackScholesParams& p) {
    return MarketModel(p.horizon, ScalarCurve::constant(p.r),
                       VectorCurve::constant(Eigen::VectorXd::Constant(1, p.b)),
                       MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, p.sigma)));
}

Eigen::VectorXd MarketModel::excess_return(double t) const {
    return drift_(t).array() - risk_free_(t);
}

Eigen::MatrixXd MarketModel::covariance(double t) const {
    const Eigen::MatrixXd s = volatility_(t);
    return s * s.transpose();
}

Eigen::VectorXd MarketModel::market_direction(double t) const {
    const Eigen::MatrixXd cov = covariance(t);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw AssumptionViolation("A2", fmt::format("sigma sigma^T is singular at t = {}", t));
    }
    // pivots of the Cholesky factor relative to the largest variance
    const double scale = cov.diagonal().cwiseAbs().maxCoeff();
    const double pivot = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
    if (!(pivot * pivot > 1e-12 * scale)) {
        throw AssumptionViolation("A2", fmt::format("sigma sigma^T is numerically singular at t = {}", t));
    }
    return llt.solve(excess_return(t));
}

Eigen::VectorXd MarketModel::diffusion_direction(double t) const {
    return volatility_(t).transpose() * market_direction(t);
}

double MarketModel::rho(double t) const {
    return excess_return(t).dot(market_direction(t));
}

std::vector<double> MarketModel::rho_breaks(extended a, extended b) const {
    std::vector<double> cuts;
    for (const auto& v : {risk_free_.breaks(), drift_.breaks(), volatility_.breaks()}) {
        for (double x : v) {
            if (x > a && x < b) cuts.push_back(x);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

extended MarketModel::integral_r(extended a, extended b) const {
    if (b <= a) return 0.0L;
    if (risk_free_.is_step()) {
        std::vector<double> cuts;
        for (double x : risk_free_.breaks()) {
            if (x > a && x < b) cuts.push_back(x);
        }
        extended acc = 0.0L;
        extended left = a;
        for (std::size_t i = 0; i <= cuts.size(); ++i) {
            const extended right = i < cuts.size() ? static_cast<extended>(cuts[i]) : b;
            acc += static_cast<extended>(risk_free_(static_cast<double>(left))) * (right - left);
            left = right;
        }
        return acc;
    }
    const auto panels = static_cast<std::size_t>(
        std::ceil(static_cast<double>(simpson_panels_) * static_cast<double>((b - a) / horizon_)));
    return simpson([this](extended t) { return risk_free_(static_cast<double>(t)); }, a, b, panels);
}

extended MarketModel::integral_rho(extended a, extended b) const {
    if (b <= a) return 0.0L;
    if (risk_free_.is_step() && drift_.is_step() && volatility_.is_step()) {
        auto cuts = rho_breaks(a, b);
        extended acc = 0.0L;
        extended left = a;
        for (std::size_t i = 0; i <= cuts.size(); ++i) {
            const extended right = i < cuts.size() ? static_cast<extended>(cuts[i]) : b;
            acc += static_cast<extended>(rho(static_cast<double>(left))) * (right - left);
            left = right;
        }
        return acc;
    }
    const auto panels = static_cast<std::size_t>(
        std::ceil(static_cast<double>(simpson_panels_) * static_cast<double>((b - a) / horizon_)));
    return simpson([this](extended t) { return rho(static_cast<double>(t)); }, a, b, panels);
}

std::optional<BlackScholesParams> MarketModel::as_black_scholes() const {
    if (assets_ != 1 || !risk_free_.is_constant() || !drift_.is_constant() ||
        !volatility_.is_constant()) {
        return std::nullopt;
    }
    BlackScholesParams p;
    p.r = risk_free_(0.0);
    p.b = drift_(0.0)(0);
    p.sigma = volatility_(0.0)(0, 0);
    p.horizon = horizon_;
    return p;
}

double rho(const MarketModel& model, double t) {
    check_time(model, t, "rho");
    return model.rho(t);
}

// ---------------------------------------------------------------------------
// TargetSpec

TargetSpec::TargetSpec(Kind kind, Builtin builtin, double parameter, TargetFunction fn,
                       TargetFunction dfn, std::string label, bool horizon_only)
    : kind_(kind),
      builtin_(builtin),
      parameter_(parameter),
      fn_(std::move(fn)),
      dfn_(std::move(dfn)),
      label_(std::move(label)),
      horizon_only_(horizon_only) {}

TargetSpec TargetSpec::case1_alpha(double alpha) {
    return TargetSpec(Kind::RiskAversion, Builtin::Case1Alpha, alpha, {}, {},
                      fmt::format("alpha(s,y)={}/y", alpha), false);
}

TargetSpec TargetSpec::case2_k(double k) {
    return TargetSpec(Kind::WealthTarget, Builtin::Case2K, k, {}, {},
                      fmt::format("L(s,y)=y*exp({}*(T-s))", k), false);
}

TargetSpec TargetSpec::growth_factor(TargetFunction f, std::string label, TargetFunction df_du,
                                     bool horizon_only) {
    return TargetSpec(Kind::GrowthFactor, Builtin::None, 0.0, std::move(f), std::move(df_du),
                      std::move(label), horizon_only);
}

TargetSpec TargetSpec::wealth_target(TargetFunction L, std::string label) {
    return TargetSpec(Kind::WealthTarget, Builtin::None, 0.0, std::move(L), {}, std::move(label), false);
}

TargetSpec TargetSpec::risk_aversion(TargetFunction alpha, std::string label) {
    return TargetSpec(Kind::RiskAversion, Builtin::None, 0.0, std::move(alpha), {}, std::move(label),
                      false);
}

extended TargetSpec::value(const MarketModel& model, extended a, extended b) const {
    const extended T = model.horizon();
    switch (builtin_) {
    case Builtin::Case1Alpha: {
        const extended alpha = parameter_;
        if (kind_ == Kind::RiskAversion) return alpha / b;
        // growth factor over [a, b]: (e^{int rho} - 1 + alpha e^{int r}) / alpha
        const extended P = model.integral_rho(a, b);
        const extended R = model.integral_r(a, b);
        return (std::expm1(P) + alpha * std::exp(R)) / alpha;
    }
    case Builtin::Case2K: {
        const extended k = parameter_;
        if (kind_ == Kind::WealthTarget) return b * std::exp(k * (T - a));
        return std::exp(k * (b - a));
    }
    case Builtin::None:
        break;
    }
    return fn_(a, b);
}

extended TargetSpec::growth_partial_u(const MarketModel& model, extended u, extended v) const {
    if (kind_ != Kind::GrowthFactor) throw DomainError("growth_partial_u needs a growth factor");
    if (builtin_ == Builtin::Case1Alpha) {
        const extended alpha = parameter_;
        const extended P = model.integral_rho(u, v);
        const extended R = model.integral_r(u, v);
        const double uu = static_cast<double>(u);
        return -(model.rho(uu) * std::exp(P) + alpha * model.risk_free(uu) * std::exp(R)) / alpha;
    }
    if (builtin_ == Builtin::Case2K) {
        const extended k = parameter_;
        return -k * std::exp(k * (v - u));
    }
    if (dfn_) return dfn_(u, v);
    // second-order backward difference; f is only defined for u <= v
    const extended h = 1e-5L * model.horizon();
    return (3.0L * fn_(u, v) - 4.0L * fn_(u - h, v) + fn_(u - 2.0L * h, v)) / (2.0L * h);
}

TargetSpec growth_factor_of(const TargetSpec& target, const MarketModel& model) {
    using Kind = TargetSpec::Kind;
    using Builtin = TargetSpec::Builtin;
    if (target.kind() == Kind::GrowthFactor) return target;

    if (target.builtin() == Builtin::Case1Alpha) {
        return TargetSpec::growth_factor(
                   [model, alpha = static_cast<extended>(target.parameter())](extended u, extended v) {
                       return (std::expm1(model.integral_rho(u, v)) +
                               alpha * std::exp(model.integral_r(u, v))) /
                              alpha;
                   },
                   "f from " + target.label(),
                   [model, alpha = static_cast<extended>(target.parameter())](extended u, extended v) {
                       const double uu = static_cast<double>(u);
                       return -(model.rho(uu) * std::exp(model.integral_rho(u, v)) +
                                alpha * model.risk_free(uu) * std::exp(model.integral_r(u, v))) /
                              alpha;
                   });
    }
    if (target.builtin() == Builtin::Case2K) {
        const extended k = target.parameter();
        return TargetSpec::growth_factor([k](extended u, extended v) { return std::exp(k * (v - u)); },
                                         "f from " + target.label(),
                                         [k](extended u, extended v) { return -k * std::exp(k * (v - u)); });
    }

    const TargetSpec wealth = target.kind() == Kind::WealthTarget ? target : convert_target(target, model);
    const extended T = model.horizon();
    for (double s : {0.0, 0.25, 0.5, 0.75}) {
        const extended st = s * T;
        const extended one = wealth.value(model, st, 1.0L);
        const extended three = wealth.value(model, st, 3.0L);
        if (std::fabs(three - 3.0L * one) > 1e-9L * std::max<extended>(1.0L, std::fabs(three))) {
            throw DomainError("wealth target is not proportional to wealth; no growth factor f(s,T) exists");
        }
    }
    return TargetSpec::growth_factor(
        [model, wealth](extended u, extended) { return wealth.value(model, u, 1.0L); },
        "f from " + target.label(), {}, true);
}

double gamma(const MarketModel& model, const TargetSpec& target, double s, GammaOptions opts) {
    check_time(model, s, "gamma");
    const TargetSpec g = growth_factor_of(target, model);
    const extended T = model.horizon();
    const extended ss = std::min<extended>(std::max<extended>(s, 0.0L), T);
    const extended P = model.integral_rho(ss, T);
    const extended R = model.integral_r(ss, T);

    auto direct = [&](extended u, extended P_u, extended R_u) {
        return (g.value(model, u, T) - std::exp(R_u - P_u)) / (-std::expm1(-P_u));
    };
    const extended window = static_cast<extended>(opts.limit_window) * T;
    if (T - ss < window) {
        // l'Hopital at T: ratio of the s-derivatives of numerator and denominator
        const double td = model.horizon();
        const extended at_T = (g.growth_partial_u(model, T, T) + (model.risk_free(td) - model.rho(td))) /
                              -static_cast<extended>(model.rho(td));
        if (ss == T) return static_cast<double>(at_T);
        // linear blend towards the direct formula at the window edge keeps gamma continuous
        const extended edge = T - window;
        const extended at_edge = direct(edge, model.integral_rho(edge, T), model.integral_r(edge, T));
        return static_cast<double>(at_T + (at_edge - at_T) * (T - ss) / window);
    }
    return static_cast<double>(direct(ss, P, R));
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << fmt::format("{:<4} {}  {}", c.passed ? "ok" : "FAIL", c.name, c.detail);
        if (c.offending_time) os << fmt::format(" (t = {:.6g}", *c.offending_time);
        if (c.offending_time && c.offending_time2) os << fmt::format(", v = {:.6g}", *c.offending_time2);
        if (c.offending_time) os << ")";
        os << '\n';
    }
    os << fmt::format("delta = {:.6g}, min rho = {:.6g}\n", delta, min_rho);
    return os.str();
}

ValidationReport validate_assumptions(const MarketModel& model, const TargetSpec& target,
                                      const ValidationOptions& opts) {
    ValidationReport report;
    const double T = model.horizon();
    const std::size_t n = std::max<std::size_t>(2, opts.grid_points);
    auto grid_time = [&](std::size_t i) { return T * static_cast<double>(i) / static_cast<double>(n - 1); };

    AssumptionCheck a1{"A1", true, "r, B, sigma finite and bounded", {}, {}};
    AssumptionCheck a2{"A2", true, "B != 0 and sigma sigma^T >= delta I", {}, {}};
    double delta = std::numeric_limits<double>::infinity();
    double min_rho = std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < n && a1.passed; ++i) {
        const double t = grid_time(i);
        const double r = model.risk_free(t);
        const Eigen::VectorXd B = model.excess_return(t);
        const Eigen::MatrixXd s = model.volatility(t);
        const bool finite = std::isfinite(r) && B.allFinite() && s.allFinite();
        const double mag = std::max({std::fabs(r), B.cwiseAbs().maxCoeff(), s.cwiseAbs().maxCoeff()});
        if (!finite || mag > opts.bound) {
            a1.passed = false;
            a1.detail = finite ? fmt::format("coefficient magnitude {:.3g} exceeds bound {:.3g}", mag, opts.bound)
                               : "non-finite coefficient";
            a1.offending_time = t;
        }
    }
    report.checks.push_back(a1);

    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid_time(i);
        const Eigen::VectorXd B = model.excess_return(t);
        const Eigen::MatrixXd cov = model.covariance(t);
        if (!B.allFinite() || !cov.allFinite()) continue; // reported under A1
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
        const double lam = eig.eigenvalues().minCoeff();
        delta = std::min(delta, lam);
        if (a2.passed && !(lam > 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()))) {
            a2.passed = false;
            a2.detail = fmt::format("sigma sigma^T has eigenvalue {:.3g} (not positive definite)", lam);
            a2.offending_time = t;
            continue;
        }
        if (a2.passed && B.norm() == 0.0) {
            a2.passed = false;
            a2.detail = "excess return B(t) = 0";
            a2.offending_time = t;
            continue;
        }
        if (lam > 0.0) {
            const double rh = B.dot(cov.llt().solve(B));
            min_rho = std::min(min_rho, rh);
            if (a2.passed && !(rh > 0.0)) {
                a2.passed = false;
                a2.detail = fmt::format("rho(t) = {:.3g} is not positive", rh);
                a2.offending_time = t;
            }
        }
    }
    report.delta = delta;
    report.min_rho = min_rho;
    report.checks.push_back(a2);

    // parameter rules of the built-in families
    if (target.builtin() == TargetSpec::Builtin::Case1Alpha) {
        AssumptionCheck c{"alpha > 0", target.parameter() > 0.0,
                          fmt::format("alpha = {}", target.parameter()), {}, {}};
        report.checks.push_back(c);
    } else if (target.builtin() == TargetSpec::Builtin::Case2K) {
        bool ok = true;
        std::optional<double> where;
        for (std::size_t i = 0; i < n && ok; ++i) {
            if (!(target.parameter() > model.risk_free(grid_time(i)))) {
                ok = false;
                where = grid_time(i);
            }
        }
        report.checks.push_back({"k > r", ok,
                                 ok ? fmt::format("k = {} exceeds r", target.parameter())
                                    : fmt::format("k = {} must exceed the risk-free rate r (k > r)",
                                                  target.parameter()),
                                 where, {}});
    }

    AssumptionCheck a3{"A3", true, "f(u,u) = 1, f(u,v) >= exp(int_u^v r), df/du(T,T) finite", {}, {}};
    try {
        const bool case1_ok = target.builtin() != TargetSpec::Builtin::Case1Alpha || target.parameter() > 0.0;
        if (!case1_ok) throw DomainError("alpha must be positive");
        const TargetSpec g = growth_factor_of(target, model);
        const std::size_t pn = std::max<std::size_t>(2, opts.pair_points);
        std::vector<double> vs;
        if (g.horizon_only()) {
            vs.push_back(T);
        } else {
            for (std::size_t j = 0; j < pn; ++j) vs.push_back(T * static_cast<double>(j) / static_cast<double>(pn - 1));
        }
        const extended tol = 1e-12L;
        for (std::size_t i = 0; i < n && a3.passed; ++i) {
            const double u = grid_time(i);
            if (!g.horizon_only() || i == n - 1) {
                const extended fuu = g.value(model, u, u);
                if (!(std::fabs(fuu - 1.0L) <= 1e-10L)) {
                    a3.passed = false;
                    a3.detail = fmt::format("f(u,u) = {:.6g} != 1", static_cast<double>(fuu));
                    a3.offending_time = u;
                    a3.offending_time2 = u;
                    break;
                }
            }
            for (double v : vs) {
                if (v < u) continue;
                const extended f = g.value(model, u, v);
                const extended floor = std::exp(model.integral_r(u, v));
                if (!std::isfinite(static_cast<double>(f)) || f < floor * (1.0L - tol)) {
                    a3.passed = false;
                    a3.detail = fmt::format("f(u,v) = {:.6g} below risk-free growth {:.6g}",
                                            static_cast<double>(f), static_cast<double>(floor));
                    a3.offending_time = u;
                    a3.offending_time2 = v;
                    break;
                }
            }
        }
        if (a3.passed) {
            const extended d = g.growth_partial_u(model, T, T);
            if (!std::isfinite(static_cast<double>(d))) {
                a3.passed = false;
                a3.detail = "df/du(T,T) is not finite";
                a3.offending_time = T;
            }
        }
    } catch (const std::exception& e) {
        a3.passed = false;
        a3.detail = e.what();
    }
    report.checks.push_back(a3);
    return report;
}

// ---------------------------------------------------------------------------
// (GL) conversion

TargetSpec convert_target(const TargetSpec& spec, const MarketModel& model, const ConversionGrid& grid) {
    using Kind = TargetSpec::Kind;
    if (spec.kind() == Kind::GrowthFactor) {
        throw DomainError("convert_target expects a risk-aversion or wealth-target specification");
    }
    const double T = model.horizon();
    const std::size_t n = std::max<std::size_t>(2, grid.time_points);
    // s = T is excluded: both sides of (GL) degenerate there
    auto for_each_point = [&](auto&& fn) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double s = T * static_cast<double>(i) / static_cast<double>(n - 1);
            for (double y : grid.wealths) fn(s, y);
        }
    };

    if (spec.kind() == Kind::RiskAversion) {
        for_each_point([&](double s, double y) {
            const extended a = spec.value(model, s, y);
            if (!(a > 0.0L)) {
                throw DomainError(fmt::format("risk aversion alpha({}, {}) = {} is not positive", s, y,
                                              static_cast<double>(a)));
            }
        });
        // L = (e^{P} - 1)/alpha + y e^{R}
        return TargetSpec::wealth_target(
            [model, spec](extended s, extended y) {
                const extended T = model.horizon();
                const extended P = model.integral_rho(s, T);
                const extended R = model.integral_r(s, T);
                return std::expm1(P) / spec.value(model, s, y) + y * std::exp(R);
            },
            "L from " + spec.label());
    }

    // alpha = (e^{P} - 1) / (L - y e^{R})
    auto alpha = [model, spec](extended s, extended y) {
        const extended T = model.horizon();
        const extended P = model.integral_rho(s, T);
        const extended R = model.integral_r(s, T);
        return std::expm1(P) / (spec.value(model, s, y) - y * std::exp(R));
    };
    for_each_point([&](double s, double y) {
        const extended a = alpha(s, y);
        if (!(a > 0.0L)) {
            throw DomainError(fmt::format(
                "converted risk aversion alpha({}, {}) = {} is not positive (target below risk-free growth)",
                s, y, static_cast<double>(a)));
        }
    });
    return TargetSpec::risk_aversion(alpha, "alpha from " + spec.label());
}

} // namespace naive_mv
