#include <doctest.h>

#include <cmath>

#include "naive_mv/analysis.hpp"
#include "naive_mv/market_model.hpp"

using namespace naive_mv;

namespace {

// 50-digit references from tests/oracles/closed_forms.py
constexpr double kF0 = 1.114375623731966168;
constexpr double kGamma0 = 2.114375623731966168;
constexpr double kGamma0Case2 = 1.381188724913816047;

MarketModel bs() { return MarketModel::black_scholes({}); }

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

const AssumptionCheck* find(const ValidationReport& r, const std::string& name) {
    for (const auto& c : r.checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

} // namespace

TEST_CASE("rho") {
    SUBCASE("identity covariance") {
        const MarketModel m(1.0, ScalarCurve::constant(0.0), VectorCurve::constant(Eigen::Vector2d(1.0, 0.0)),
                            MatrixCurve::constant(Eigen::Matrix2d::Identity()));
        CHECK(rho(m, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("black-scholes") { CHECK(rel(rho(bs(), 0.3), 0.09) < 1e-14); }
    SUBCASE("singular covariance names A2") {
        Eigen::Matrix2d s;
        s << 0.2, 0.2, 0.2, 0.2;
        const MarketModel m(1.0, ScalarCurve::constant(0.0), VectorCurve::constant(Eigen::Vector2d(0.1, 0.1)),
                            MatrixCurve::constant(s));
        try {
            (void)rho(m, 0.0);
            FAIL("expected an assumption violation");
        } catch (const AssumptionViolation& e) {
            CHECK(e.assumption() == "A2");
        }
    }
    SUBCASE("outside [0,T]") { CHECK_THROWS_AS((void)rho(bs(), 1.5), DomainError); }
}

TEST_CASE("piecewise integrals are exact") {
    const MarketModel m(2.0, ScalarCurve::piecewise({0.5, 1.5}, {0.01, 0.03, 0.02}),
                        VectorCurve::constant(Eigen::VectorXd::Constant(1, 0.08)),
                        MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, 0.2)));
    CHECK(static_cast<double>(m.integral_r(0.0, 2.0)) == doctest::Approx(0.005 + 0.03 + 0.01).epsilon(1e-15));
    CHECK(static_cast<double>(m.integral_r(0.25, 1.0)) == doctest::Approx(0.0025 + 0.015).epsilon(1e-15));
    // rho jumps with r: ((0.08 - r) / 0.2)^2
    const double expect = 0.5 * std::pow(0.07 / 0.2, 2) + 1.0 * std::pow(0.05 / 0.2, 2) + 0.5 * std::pow(0.06 / 0.2, 2);
    CHECK(static_cast<double>(m.integral_rho(0.0, 2.0)) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("smooth coefficients integrate by Simpson") {
    const MarketModel m(1.0, ScalarCurve::function("0.02+0.01t", [](double t) { return 0.02 + 0.01 * t; }),
                        VectorCurve::constant(Eigen::VectorXd::Constant(1, 0.08)),
                        MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, 0.2)));
    CHECK(static_cast<double>(m.integral_r(0.2, 0.9)) == doctest::Approx(0.02 * 0.7 + 0.005 * (0.81 - 0.04)).epsilon(1e-13));
}

TEST_CASE("gamma") {
    const MarketModel m = bs();
    SUBCASE("case 1 at s = 0") { CHECK(rel(gamma(m, growth_factor_of(TargetSpec::case1_alpha(1.0), m), 0.0), kGamma0) < 1e-12); }
    SUBCASE("case 2 at s = 0") { CHECK(rel(gamma(m, growth_factor_of(TargetSpec::case2_k(0.05), m), 0.0), kGamma0Case2) < 1e-12); }
    SUBCASE("risk-free target") {
        const TargetSpec f = TargetSpec::growth_factor([](extended u, extended v) { return std::exp(0.02L * (v - u)); },
                                                       "riskless");
        for (double s : {0.0, 0.5, 0.99}) CHECK(std::fabs(gamma(m, f, s) - std::exp(0.02 * (1.0 - s))) < 1e-14);
        // inside the 1e-6 T window the derivative ratio stands in; it is off by O(r (T - s))
        CHECK(std::fabs(gamma(m, f, 1.0 - 1e-7) - std::exp(0.02 * 1e-7)) < 1e-8);
        CHECK(gamma(m, f, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("limit at T matches the l'Hopital value") {
        // (f'(T) - (r - rho)) / rho: 2 for alpha = 1, (k - r + rho) / rho for k = 0.05
        CHECK(gamma(m, growth_factor_of(TargetSpec::case1_alpha(1.0), m), 1.0) == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(gamma(m, growth_factor_of(TargetSpec::case2_k(0.05), m), 1.0) == doctest::Approx(0.12 / 0.09).epsilon(1e-9));
    }
    SUBCASE("continuity near T") {
        const TargetSpec g = growth_factor_of(TargetSpec::case1_alpha(1.0), m);
        auto max_jump = [&](int n) {
            double worst = 0.0;
            for (int i = 0; i < n; ++i) {
                const double a = 0.99 + 0.01 * i / n;
                const double b = 0.99 + 0.01 * (i + 1) / n;
                worst = std::max(worst, std::fabs(gamma(m, g, a) - gamma(m, g, std::min(b, 1.0))));
            }
            return worst;
        };
        const double coarse = max_jump(100);
        const double fine = max_jump(200);
        // adjacent differences scale like |gamma'| h; the ratio is 1/2 up to O(h)
        CHECK(fine <= 0.5 * coarse * (1.0 + 1e-3));
        // no jump where the limit branch takes over
        CHECK(std::fabs(gamma(m, g, 1.0 - 0.99e-6) - gamma(m, g, 1.0 - 1.01e-6)) < 1e-7);
    }
    SUBCASE("domain") {
        const TargetSpec g = growth_factor_of(TargetSpec::case1_alpha(1.0), m);
        CHECK_THROWS_AS((void)gamma(m, g, -0.1), DomainError);
        CHECK_THROWS_AS((void)gamma(m, g, 1.1), DomainError);
    }
}

TEST_CASE("growth factor of case 1") {
    const MarketModel m = bs();
    const TargetSpec g = growth_factor_of(TargetSpec::case1_alpha(1.0), m);
    CHECK(rel(static_cast<double>(g.value(m, 0.0, 1.0)), kF0) < 1e-14);
    CHECK(static_cast<double>(g.value(m, 0.4, 0.4)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("validate assumptions") {
    SUBCASE("black-scholes with case 1 passes") {
        const ValidationReport r = validate_assumptions(bs(), TargetSpec::case1_alpha(1.0));
        CHECK(r.all_passed());
        CHECK(r.delta == doctest::Approx(0.04));
        CHECK(r.min_rho >= r.delta * 0.0);
        CHECK(r.min_rho == doctest::Approx(0.09));
    }
    SUBCASE("constant f = 0.5 fails A3") {
        const TargetSpec f = TargetSpec::growth_factor([](extended, extended) { return 0.5L; }, "half");
        const ValidationReport r = validate_assumptions(bs(), f);
        CHECK_FALSE(r.all_passed());
        const auto* a3 = find(r, "A3");
        REQUIRE(a3);
        CHECK_FALSE(a3->passed);
        CHECK(a3->offending_time.has_value());
    }
    SUBCASE("b = r fails A2") {
        BlackScholesParams p;
        p.b = p.r;
        const MarketModel m(1.0, ScalarCurve::constant(p.r), VectorCurve::constant(Eigen::VectorXd::Constant(1, p.b)),
                            MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, p.sigma)));
        const ValidationReport r = validate_assumptions(m, TargetSpec::case1_alpha(1.0));
        const auto* a2 = find(r, "A2");
        REQUIRE(a2);
        CHECK_FALSE(a2->passed);
        CHECK(a2->offending_time.has_value());
    }
    SUBCASE("k below r fails the k > r rule") {
        const ValidationReport r = validate_assumptions(bs(), TargetSpec::case2_k(0.01));
        const auto* k = find(r, "k > r");
        REQUIRE(k);
        CHECK_FALSE(k->passed);
    }
    SUBCASE("a report is produced for any input") {
        const ValidationReport r = validate_assumptions(bs(), TargetSpec::case1_alpha(-1.0));
        CHECK_FALSE(r.all_passed());
        CHECK_FALSE(r.to_text().empty());
    }
}

TEST_CASE("convert target") {
    const MarketModel m = bs();
    SUBCASE("case 1 gives the closed-form L") {
        const TargetSpec L = convert_target(TargetSpec::case1_alpha(1.0), m);
        CHECK(L.kind() == TargetSpec::Kind::WealthTarget);
        for (double s : {0.0, 0.37, 0.8}) {
            for (double y : {0.5, 2.0}) {
                const double tau = 1.0 - s;
                const double expect = y * (std::exp(tau * 0.09) - 1.0 + std::exp(tau * 0.02));
                CHECK(rel(static_cast<double>(L.value(m, s, y)), expect) < 1e-14);
            }
        }
    }
    SUBCASE("case 2 gives alpha = phi / y") {
        const TargetSpec a = convert_target(TargetSpec::case2_k(0.05), m);
        CHECK(a.kind() == TargetSpec::Kind::RiskAversion);
        const double phi0 = 3.0310596145833115866; // oracle
        CHECK(rel(static_cast<double>(a.value(m, 0.0, 1.0)), phi0) < 1e-13);
        CHECK(rel(static_cast<double>(a.value(m, 0.0, 4.0)), phi0 / 4.0) < 1e-13);
    }
    SUBCASE("round trip at 100 points") {
        const TargetSpec alpha = TargetSpec::case1_alpha(1.0);
        const TargetSpec back = convert_target(convert_target(alpha, m), m);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const double s = 0.99 * i / 99.0;
            const double y = 0.1 + 9.9 * ((i * 37) % 100) / 99.0;
            worst = std::max(worst, rel(static_cast<double>(back.value(m, s, y)), 1.0 / y));
        }
        CHECK(worst < 1e-12);
    }
    SUBCASE("(GL) balances") {
        const TargetSpec alpha = TargetSpec::case1_alpha(2.0);
        const TargetSpec L = convert_target(alpha, m);
        for (double s : {0.0, 0.5, 0.95}) {
            for (double y : {0.3, 1.0, 7.0}) {
                const extended lhs = gamma_bar(m, alpha, s, y);
                const extended rhs = gamma_tilde(m, L, s, y);
                CHECK(static_cast<double>(std::fabs(lhs - rhs) / std::fabs(lhs)) < 1e-12);
            }
        }
    }
    SUBCASE("non-positive alpha is rejected") {
        CHECK_THROWS_AS((void)convert_target(TargetSpec::case1_alpha(-1.0), m), DomainError);
        // a wealth target below risk-free growth implies alpha < 0
        CHECK_THROWS_AS((void)convert_target(TargetSpec::case2_k(0.0), m), DomainError);
    }
    SUBCASE("growth factors are not convertible") {
        CHECK_THROWS_AS((void)convert_target(growth_factor_of(TargetSpec::case1_alpha(1.0), m), m), DomainError);
    }
}
