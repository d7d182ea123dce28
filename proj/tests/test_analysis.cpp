#include <doctest.h>

#include <cmath>

#include "naive_mv/analysis.hpp"

using namespace naive_mv;

namespace {

// 50-digit references from tests/oracles/closed_forms.py
constexpr double kNaiveMean = 1.11988365950510680602;
constexpr double kPrecommitMean = 1.114375623731966168;
constexpr double kFrontierVariance = 0.094174283705210357873;

struct AlphaRow {
    double alpha, naive, precommitted;
};
constexpr AlphaRow kAlphaRows[] = {
    {0.25, 1.48126909636480114, 1.39689847484759724},
    {0.5, 1.22930578663390005, 1.20854990743717653},
    {1.0, kNaiveMean, kPrecommitMean},
    {2.0, 1.06888110194781585, 1.06728848187936099},
    {4.0, 1.04425759874488685, 1.04374491095305840},
};

const BlackScholesParams P0{};
MarketModel bs() { return MarketModel::black_scholes(P0); }
double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

SimConfig small(std::size_t steps, std::size_t paths) {
    SimConfig c;
    c.grid = TimeGrid(0.0, 1.0, steps);
    c.path_count = paths;
    c.seed = 11;
    c.threads = 1;
    return c;
}

} // namespace

TEST_CASE("frontier variance") {
    const MarketModel m = bs();
    CHECK(rel(frontier_variance(m, 0.0, 1.0, kPrecommitMean), kFrontierVariance) < 1e-12);
    CHECK(frontier_variance(m, 0.0, 1.0, std::exp(0.02)) == doctest::Approx(0.0).epsilon(1e-30));
    SUBCASE("homogeneous of degree two in (y, E)") {
        for (double lam : {0.5, 3.0}) {
            CHECK(rel(frontier_variance(m, 0.3, lam * 1.2, lam * 1.4), lam * lam * frontier_variance(m, 0.3, 1.2, 1.4)) < 1e-13);
        }
    }
    SUBCASE("point") {
        const FrontierPoint p = frontier_point(m, 0.0, 1.0, 1.2);
        CHECK(p.expected == 1.2);
        CHECK(p.variance == frontier_variance(m, 0.0, 1.0, 1.2));
    }
    SUBCASE("no risk premium has no frontier") {
        const MarketModel flat(1.0, ScalarCurve::constant(0.02), VectorCurve::constant(Eigen::VectorXd::Constant(1, 0.02)),
                               MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, 0.2)));
        CHECK_THROWS_AS((void)frontier_variance(flat, 0.0, 1.0, 1.1), DomainError);
    }
}

TEST_CASE("naive terminal mean in closed form") {
    const MarketModel m = bs();
    const TimeGrid grid(0.0, 1.0, 10000);
    for (const AlphaRow& row : kAlphaRows) {
        CAPTURE(row.alpha);
        CHECK(rel(expected_terminal_naive_closed(P0, row.alpha, 1.0), row.naive) < 1e-13);
        const double ode = mean_ode(naive_policy(m, TargetSpec::case1_alpha(row.alpha)), 0.0, 1.0, grid).back();
        CHECK(rel(ode, row.naive) < 1e-8);
        const double pre = mean_ode(pre_committed_policy(m, TargetSpec::case1_alpha(row.alpha), 0.0, 1.0), 0.0, 1.0, grid).back();
        CHECK(rel(pre, row.precommitted) < 1e-9);
        // the naive agent always expects more, and so carries more than frontier risk
        CHECK(row.naive > row.precommitted);
    }
    CHECK(rel(expected_terminal_naive_closed(P0, 1.0, 2.5), 2.5 * kNaiveMean) < 1e-14);
    SUBCASE("infinite risk aversion holds cash") {
        CHECK(rel(expected_terminal_naive_closed(P0, 1e12, 1.0), std::exp(0.02)) < 1e-11);
    }
    SUBCASE("rho = r branch") {
        BlackScholesParams p = P0;
        p.b = p.r + p.sigma * std::sqrt(p.r); // rho = r
        CHECK(rel(expected_terminal_naive_closed(p, 2.0, 1.0), std::exp(p.r + p.rho() / 2.0)) < 1e-12);
    }
    CHECK_THROWS_AS((void)expected_terminal_naive_closed(P0, 0.0, 1.0), DomainError);
}

TEST_CASE("risk aversion and wealth targets agree") {
    const MarketModel m = bs();
    SUBCASE("case 1") {
        const EquivalenceReport r = precommit_equivalence_check(m, TargetSpec::case1_alpha(1.0));
        CHECK(r.points == 2500);
        CHECK(r.max_abs_diff < 1e-12);
    }
    SUBCASE("case 2") { CHECK(precommit_equivalence_check(m, TargetSpec::case2_k(0.05)).max_abs_diff < 1e-12); }
    SUBCASE("a perturbed pair is detected") {
        const TargetSpec alpha = TargetSpec::case1_alpha(1.0);
        const TargetSpec L = convert_target(alpha, m);
        const TargetSpec off = TargetSpec::wealth_target(
            [&](extended s, extended y) { return 1.01L * L.value(m, s, y); }, "L x 1.01");
        CHECK(precommit_equivalence_check(m, alpha, off).max_abs_diff > 1e-3);
    }
    SUBCASE("zero wealth") {
        EquivalenceGrid g;
        g.y_min = 0.0;
        g.y_points = 2;
        g.y_max = 1.0;
        const EquivalenceReport r = precommit_equivalence_check(m, TargetSpec::case2_k(0.05), g);
        CHECK(std::isfinite(r.max_abs_diff));
    }
}

TEST_CASE("convergence metric on a small ensemble") {
    const MarketModel m = bs();
    const TargetSpec t = TargetSpec::case1_alpha(1.0);
    const SimConfig c = small(64, 1024);
    const ConvergenceReport a = convergence_metric({0, 2, 4, 6}, m, t, c);
    REQUIRE(a.rows.size() == 4);
    CHECK(a.strictly_decreasing());
    for (const auto& row : a.rows) {
        CHECK(row.checksum == a.reference_checksum);
        CHECK(row.increment_bound > 0.0);
        CHECK(row.increment_excess <= 0.0);
        CHECK(row.second_moment_excess <= 0.0);
        CHECK(row.bound_integral >= row.second_moment_integral);
    }
    CHECK(a.rows[1].increment_bound == doctest::Approx(a.rows[0].increment_bound / 4.0));

    SUBCASE("reproducible") {
        const ConvergenceReport b = convergence_metric({0, 2, 4, 6}, m, t, c);
        CHECK(a.to_csv() == b.to_csv());
    }
    SUBCASE("n = 0 measures the pre-committed run") {
        const PathEnsemble naive = simulate_policy_paths(naive_policy(m, t), 0.0, 1.0, c);
        const PathEnsemble pre = simulate_policy_paths(pre_committed_policy(m, t, 0.0, 1.0), 0.0, 1.0, c);
        double gap = 0.0;
        for (std::size_t i = 0; i < c.grid.points(); ++i) gap = std::max(gap, std::fabs(pre.stats.mean[i] - naive.stats.mean[i]));
        CHECK(a.rows[0].mean_distance == doctest::Approx(gap).epsilon(1e-9));
    }
    SUBCASE("csv") {
        const std::string csv = a.to_csv();
        CHECK(csv.rfind("n,d_n,increment_mc,increment_bound,increment_stderr,mean_distance,second_moment_integral,bound_integral\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    }
    SUBCASE("depth beyond the grid") { CHECK_THROWS_AS((void)convergence_metric({7}, m, t, c), ConfigurationError); }
}

TEST_CASE("increment constants") {
    const MarketModel m = bs();
    const TargetSpec t = TargetSpec::case1_alpha(1.0);
    const TimeGrid grid(0.0, 1.0, 256);
    const BoundCurve y = bound_curve_Y(m, t, grid, 1.0);
    const IncrementConstants k = increment_constants(m, t, grid, y);
    CHECK(k.a_star == doctest::Approx(0.07 * 0.07));
    CHECK(k.f_star == doctest::Approx(0.09));
    CHECK(k.c_star == doctest::Approx(0.09 * 0.09));
    CHECK(k.d_star == doctest::Approx(0.09));
    CHECK(k.y_terminal == y.terminal());
    CHECK(k.bound(1.0, 3) == doctest::Approx(0.5 * (k.a_star + k.gamma_star * (k.c_star + k.d_star) + k.f_star) * k.y_terminal));
}

TEST_CASE("inefficiency") {
    const MarketModel m = bs();
    const TargetSpec t = TargetSpec::case1_alpha(1.0);
    SUBCASE("zero policy sits on the frontier") {
        SimConfig c = small(64, 600);
        c.scheme = Scheme::ExactLog;
        const InefficiencyReport r = inefficiency_report(m, t, PolicyKind::Zero, c);
        CHECK(r.mean == doctest::Approx(std::exp(0.02)).epsilon(1e-14));
        CHECK(r.variance == doctest::Approx(0.0).epsilon(1e-25));
        CHECK(r.frontier == doctest::Approx(0.0).epsilon(1e-25));
        CHECK(r.passed());
    }
    SUBCASE("naive is strictly inside") {
        const InefficiencyReport r = inefficiency_report(m, t, PolicyKind::Naive, small(64, 20000));
        CHECK(r.gap > 0.0);
        CHECK(r.z > 3.0);
        CHECK(r.passed());
        CHECK(r.to_csv().rfind("policy,paths,mean,variance,frontier,gap,gap_stderr,z\n", 0) == 0);
    }
    SUBCASE("pre-committed reaches the frontier") {
        const InefficiencyReport r = inefficiency_report(m, t, PolicyKind::PreCommitted, small(256, 20000));
        CHECK(std::fabs(r.gap) <= 3.0 * r.gap_stderr);
        CHECK(r.passed());
    }
    SUBCASE("unsupported kinds") { CHECK_THROWS_AS((void)inefficiency_report(m, t, PolicyKind::WeakEquilibrium, small(8, 10)), UnsupportedError); }
}
