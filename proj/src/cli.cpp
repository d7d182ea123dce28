#include "naive_mv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "naive_mv/analysis.hpp"
#include "naive_mv/config.hpp"

namespace naive_mv {

namespace {

using json = nlohmann::ordered_json;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> steps;
    std::optional<std::string> scheme;
    std::optional<std::size_t> threads;
    std::string out;
    std::string summary;
    std::string plot;
};

void add_common(CLI::App* app, CommonOptions& o, bool simulation) {
    app->add_option("config", o.config, "configuration file")->required();
    app->add_option("--out", o.out, "CSV output (default: <output.dir>/<command>.csv, or stdout)");
    app->add_option("--summary", o.summary, "JSON summary output");
    if (simulation) {
        app->add_option("--seed", o.seed, "override sim.seed");
        app->add_option("--paths", o.paths, "override sim.paths");
        app->add_option("--steps", o.steps, "override sim.steps");
        app->add_option("--scheme", o.scheme, "override sim.scheme (euler | exact_log)");
        app->add_option("--threads", o.threads, "override sim.threads (0 = all cores)");
    }
}

RunConfig load(const CommonOptions& o) {
    RunConfig c = load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.paths) c.paths = *o.paths;
    if (o.steps) c.steps = *o.steps;
    if (o.scheme) c.scheme = parse_scheme(*o.scheme);
    if (o.threads) c.threads = *o.threads;
    return c;
}

std::string resolve(const RunConfig& c, const std::string& path) {
    if (path.empty() || path == "-") return path;
    const std::filesystem::path p(path);
    if (p.is_absolute() || c.output_dir.empty()) return path;
    return (std::filesystem::path(c.output_dir) / p).string();
}

void write_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigurationError("cannot write '" + path + "'");
    f << text;
}

/// CSV goes to --out, else <output.dir>/<command>.csv, else stdout.
void emit_csv(const RunConfig& c, const CommonOptions& o, const std::string& command, const std::string& csv,
              std::ostream& out) {
    std::string path = o.out;
    if (path.empty() && !c.output_dir.empty()) path = command + ".csv";
    if (path.empty() || path == "-") {
        out << csv;
        return;
    }
    write_file(resolve(c, path), csv);
}

void emit_summary(const RunConfig& c, const CommonOptions& o, const json& doc) {
    if (!o.summary.empty()) write_file(resolve(c, o.summary), doc.dump(2) + "\n");
}

void status(std::ostream& out, bool pass, const std::string& what) {
    out << (pass ? "PASS " : "FAIL ") << what << '\n';
}

/// Validates market and target; prints the report on failure and returns false.
bool preflight(const MarketModel& model, const TargetSpec& target, std::ostream& err) {
    const ValidationReport rep = validate_assumptions(model, target);
    if (rep.all_passed()) return true;
    err << rep.to_text();
    return false;
}

WeightCase weight_case(const RunConfig& c, int which) {
    if (which == 0) {
        if (c.target_kind == "case1_alpha" || c.target_kind == "risk_aversion") which = 1;
        else if (c.target_kind == "case2_k" || c.target_kind == "wealth_target") which = 2;
        else throw DomainError("equilibrium weights need target.kind case1_alpha or case2_k");
    }
    if (which == 1) return WeightCase::alpha(c.alpha);
    if (which == 2) return WeightCase::k(c.target_kind == "wealth_target" ? c.rate : c.k);
    throw DomainError(fmt::format("--case must be 1 or 2, got {}", which));
}

BlackScholesParams black_scholes(const MarketModel& model) {
    const auto p = model.as_black_scholes();
    if (!p) throw DomainError("this command needs a single stock with constant coefficients");
    return *p;
}

template <typename T>
T experiment_or(const RunConfig& c, const std::string& key, T fallback) {
    const auto v = c.experiment_value(key);
    if (!v) return fallback;
    if constexpr (std::is_same_v<T, std::string>) {
        return *v;
    } else {
        try {
            std::size_t used = 0;
            const double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument("trailing");
            return static_cast<T>(d);
        } catch (const std::exception&) {
            throw ParseError(0, fmt::format("experiment.{}: '{}' is not a number", key, *v));
        }
    }
}

PolicyKind parse_policy(const std::string& name) {
    for (PolicyKind k : {PolicyKind::PreCommitted, PolicyKind::Naive, PolicyKind::WeakEquilibrium,
                         PolicyKind::RegularEquilibrium, PolicyKind::Zero}) {
        if (name == to_string(k)) return k;
    }
    throw ConfigurationError("unknown policy '" + name + "' (precommitted, naive, weak, regular, zero)");
}

// ---------------------------------------------------------------------------

int cmd_validate(const CommonOptions& o, std::ostream& out) {
    const RunConfig c = load(o);
    const ValidationReport rep = validate_assumptions(c.model(), c.target());
    out << rep.to_text();
    status(out, rep.all_passed(), "assumptions");
    return rep.all_passed() ? kExitOk : kExitDomain;
}

int cmd_weights(const CommonOptions& o, int which, std::optional<std::size_t> points_flag, std::ostream& out,
                std::ostream& err) {
    const RunConfig c = load(o);
    const MarketModel model = c.model();
    const BlackScholesParams params = black_scholes(model);
    const WeightCase wc = weight_case(c, which ? which : experiment_or<int>(c, "case", 0));
    wc.check(params);
    if (!preflight(model, wc.target(), err)) return kExitDomain;
    const std::size_t points = points_flag ? *points_flag : experiment_or<std::size_t>(c, "points", 1001);
    if (points == 0) throw DomainError("--points must be positive");

    const DominanceReport rep = dominance_report(params, wc, points);
    emit_csv(c, o, "weights", rep.to_csv(), out);
    if (!o.plot.empty()) {
        std::vector<double> t, na, we, re;
        for (const auto& r : rep.rows) {
            t.push_back(r.t);
            na.push_back(r.c_na);
            we.push_back(r.c_we);
            re.push_back(r.c_re);
        }
        write_file(resolve(c, o.plot), svg_line_plot("risky weights", "t", t,
                                                     {{"c_na", na}, {"c_we", we}, {"c_re", re}}));
    }
    json doc = {{"command", "weights"},
                {"case", wc.family == WeightCase::Family::Alpha ? "alpha" : "k"},
                {"parameter", wc.parameter},
                {"points", rep.rows.size()},
                {"min_margin_we", rep.min_margin_we},
                {"min_margin_re", rep.min_margin_re},
                {"solver_residual", rep.solver_residual},
                {"solver_iterations", rep.solver_iterations},
                {"dominated", rep.dominated()},
                {"pass", rep.dominated()}};
    emit_summary(c, o, doc);
    status(out, rep.dominated(),
           fmt::format("dominance c_na > c_we, c_re on [0,T): min margins {:.6g}, {:.6g}; residual {:.3g}",
                       rep.min_margin_we, rep.min_margin_re, rep.solver_residual));
    return rep.dominated() ? kExitOk : kExitDomain;
}

int cmd_converge(const CommonOptions& o, std::optional<unsigned> nmin_flag, std::optional<unsigned> nmax_flag,
                 std::ostream& out, std::ostream& err) {
    const RunConfig c = load(o);
    const MarketModel model = c.model();
    const TargetSpec target = c.target();
    if (!preflight(model, target, err)) return kExitDomain;
    const unsigned nmin = nmin_flag ? *nmin_flag : experiment_or<unsigned>(c, "nmin", 2);
    const unsigned nmax = nmax_flag ? *nmax_flag : experiment_or<unsigned>(c, "nmax", 8);
    if (nmin > nmax) throw ConfigurationError(fmt::format("nmin = {} exceeds nmax = {}", nmin, nmax));
    std::vector<unsigned> ns;
    for (unsigned n = nmin; n <= nmax; ++n) ns.push_back(n);

    const ConvergenceReport rep = convergence_metric(ns, model, target, c.sim());
    emit_csv(c, o, "converge", rep.to_csv(), out);
    bool bound_ok = true;
    bool y_ok = true;
    for (const auto& r : rep.rows) {
        bound_ok = bound_ok && r.increment_excess <= 0.0;
        y_ok = y_ok && r.second_moment_excess <= 0.0 && r.second_moment_integral <= r.bound_integral;
    }
    if (!o.plot.empty()) {
        std::vector<double> n, d, inc, bound;
        for (const auto& r : rep.rows) {
            n.push_back(r.n);
            d.push_back(r.d_n);
            inc.push_back(r.increment_mc);
            bound.push_back(r.increment_bound);
        }
        write_file(resolve(c, o.plot), svg_line_plot("committed vs naive wealth", "n", n,
                                                     {{"d_n", d}, {"increment_mc", inc}, {"increment_bound", bound}},
                                                     true));
    }
    json rows = json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"n", r.n},
                        {"d_n", r.d_n},
                        {"increment_mc", r.increment_mc},
                        {"increment_stderr", r.increment_stderr},
                        {"increment_bound", r.increment_bound},
                        {"mean_distance", r.mean_distance},
                        {"second_moment_integral", r.second_moment_integral},
                        {"bound_integral", r.bound_integral},
                        {"second_moment_excess", r.second_moment_excess}});
    }
    const bool pass = rep.strictly_decreasing() && bound_ok;
    emit_summary(c, o, json{{"command", "converge"}, {"seed", c.seed}, {"paths", c.paths}, {"steps", c.steps},
                            {"strictly_decreasing", rep.strictly_decreasing()}, {"increment_bound_holds", bound_ok},
                            {"second_moment_bound_holds", y_ok}, {"rows", rows}, {"pass", pass}});
    status(out, pass, fmt::format("d_n strictly decreasing for n = {}..{}: {}; increment bound within 3 SE: {}", nmin,
                                  nmax, rep.strictly_decreasing() ? "yes" : "no", bound_ok ? "yes" : "no"));
    return kExitOk;
}

Policy build_policy(PolicyKind kind, const RunConfig& c, const MarketModel& model, const TargetSpec& target) {
    switch (kind) {
    case PolicyKind::PreCommitted: return pre_committed_policy(model, target, 0.0, c.initial_wealth);
    case PolicyKind::Naive: return naive_policy(model, target);
    case PolicyKind::Zero: return zero_policy(model);
    case PolicyKind::WeakEquilibrium:
    case PolicyKind::RegularEquilibrium: {
        const BlackScholesParams params = black_scholes(model);
        const WeightCase wc = weight_case(c, 0);
        wc.check(params);
        const TimeGrid grid(0.0, params.horizon, 2000);
        if (kind == PolicyKind::WeakEquilibrium) {
            return weight_policy(model, kind, weak_weight_solve(params, wc, grid).curve);
        }
        const auto times = grid.times();
        return weight_policy(model, kind, RiskyWeightCurve::sample(times, [&](double t) {
                                 return regular_weight(params, wc, t);
                             }));
    }
    default: throw ConfigurationError("unsupported policy");
    }
}

int cmd_simulate(const CommonOptions& o, const std::string& policy_flag, const std::string& paths_out,
                 std::ostream& out, std::ostream& err) {
    const RunConfig c = load(o);
    const MarketModel model = c.model();
    const TargetSpec target = c.target();
    if (!preflight(model, target, err)) return kExitDomain;
    const PolicyKind kind = parse_policy(policy_flag.empty() ? experiment_or<std::string>(c, "policy", "naive")
                                                             : policy_flag);
    const Policy policy = build_policy(kind, c, model, target);
    SimConfig sim = c.sim();
    sim.store_paths = !paths_out.empty();
    const PathEnsemble ens = simulate_policy_paths(policy, 0.0, c.initial_wealth, sim);
    emit_csv(c, o, "simulate", ens.summary_csv(), out);
    if (!paths_out.empty()) {
        const std::string path = resolve(c, paths_out);
        const std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream f(path, std::ios::binary);
        ens.write_binary(f);
    }

    const MomentCurves ode = moment_odes(policy, 0.0, c.initial_wealth, TimeGrid(0.0, model.horizon(), 10'000));
    const double reference = ode.mean.back();
    const double se = ens.terminal_stderr();
    const double diff = std::fabs(ens.terminal_mean() - reference);
    const bool pass = diff <= 3.0 * se || (se == 0.0 && diff <= 1e-9 * std::fabs(reference));
    emit_summary(c, o, json{{"command", "simulate"}, {"policy", to_string(kind)}, {"seed", c.seed},
                            {"paths", c.paths}, {"steps", c.steps}, {"scheme", to_string(c.scheme)},
                            {"terminal_mean", ens.terminal_mean()}, {"terminal_stderr", se},
                            {"terminal_variance", ens.terminal_variance()}, {"ode_mean", reference},
                            {"ode_variance", ode.variance(ode.mean.size() - 1)}, {"pass", pass}});
    status(out, pass, fmt::format("{} terminal mean {:.6f} vs moment ODE {:.6f} (|diff| = {:.2g}, 3 SE = {:.2g})",
                                  to_string(kind), ens.terminal_mean(), reference, diff, 3.0 * se));
    return kExitOk;
}

int cmd_frontier(const CommonOptions& o, std::optional<double> expected_flag, std::ostream& out,
                 std::ostream& err) {
    const RunConfig c = load(o);
    const MarketModel model = c.model();
    const TargetSpec target = c.target();
    if (!preflight(model, target, err)) return kExitDomain;
    const double y = c.initial_wealth;
    const double T = model.horizon();
    const Policy pre = pre_committed_policy(model, target, 0.0, y);
    const MomentCurves ode = moment_odes(pre, 0.0, y, TimeGrid(0.0, T, 10'000));
    const double achieved = ode.mean.back();
    const double expected = expected_flag ? *expected_flag : experiment_or<double>(c, "expected", achieved);

    const FrontierPoint fp = frontier_point(model, 0.0, y, expected);
    emit_csv(c, o, "frontier", fmt::format("s,y,expected,variance\n{:.17g},{:.17g},{:.17g},{:.17g}\n", fp.s, fp.y,
                                           fp.expected, fp.variance),
             out);
    // the pre-committed policy of the configured target must sit on the frontier
    const double v_ode = ode.variance(ode.mean.size() - 1);
    const double v_star = frontier_variance(model, 0.0, y, achieved);
    const double rel = std::fabs(v_ode - v_star) / std::max(v_star, 1e-300);
    const bool pass = rel < 1e-6;
    emit_summary(c, o, json{{"command", "frontier"}, {"expected", fp.expected}, {"variance", fp.variance},
                            {"precommitted_mean", achieved}, {"precommitted_variance", v_ode},
                            {"frontier_at_precommitted_mean", v_star}, {"pass", pass}});
    status(out, pass, fmt::format("V({:.6f}) = {:.6f}; pre-committed attains the frontier (rel. err {:.2g})", expected,
                                  fp.variance, rel));
    return kExitOk;
}

int cmd_inefficiency(const CommonOptions& o, const std::string& policy_flag, std::ostream& out,
                     std::ostream& err) {
    const RunConfig c = load(o);
    const MarketModel model = c.model();
    const TargetSpec target = c.target();
    if (!preflight(model, target, err)) return kExitDomain;
    const PolicyKind kind = parse_policy(policy_flag.empty() ? experiment_or<std::string>(c, "policy", "naive")
                                                             : policy_flag);
    const InefficiencyReport rep = inefficiency_report(model, target, kind, c.sim());
    emit_csv(c, o, "inefficiency", rep.to_csv(), out);
    emit_summary(c, o, json{{"command", "inefficiency"}, {"policy", to_string(kind)}, {"seed", c.seed},
                            {"paths", rep.path_count}, {"mean", rep.mean}, {"variance", rep.variance},
                            {"frontier", rep.frontier}, {"gap", rep.gap}, {"gap_stderr", rep.gap_stderr},
                            {"z", rep.z}, {"pass", rep.passed()}});
    const std::string claim = kind == PolicyKind::Naive ? "gap > 3 SE (off the frontier)" : "gap within 3 SE of 0";
    status(out, rep.passed(), fmt::format("{} variance gap {:.6g} (SE {:.3g}, z = {:.2f}): {}", to_string(kind), rep.gap,
                                          rep.gap_stderr, rep.z, claim));
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-variance policies under time inconsistency"};
    app.require_subcommand(1);

    CommonOptions validate_o, weights_o, converge_o, simulate_o, frontier_o, ineff_o;
    auto* validate = app.add_subcommand("validate", "check assumptions A1-A3 for the configured market and target");
    add_common(validate, validate_o, false);

    auto* weights = app.add_subcommand("weights", "naive, weak and regular equilibrium risky weights");
    add_common(weights, weights_o, false);
    int which = 0;
    std::optional<std::size_t> points;
    weights->add_option("--case", which, "1 (alpha/y) or 2 (y e^{k(T-t)}); default from target.kind");
    weights->add_option("--points", points, "uniform report points on [0,T] (default 1001)");
    weights->add_option("--plot", weights_o.plot, "SVG plot of the CSV columns");

    auto* converge = app.add_subcommand("converge", "2^-n committed wealth against the naive wealth");
    add_common(converge, converge_o, true);
    std::optional<unsigned> nmin, nmax;
    converge->add_option("--nmin", nmin, "smallest n (default 2)");
    converge->add_option("--nmax", nmax, "largest n (default 8)");
    converge->add_option("--plot", converge_o.plot, "SVG plot of the CSV columns");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo wealth under a policy from (0, x0)");
    add_common(simulate, simulate_o, true);
    std::string sim_policy, paths_out;
    simulate->add_option("--policy", sim_policy, "precommitted | naive | weak | regular | zero (default naive)");
    simulate->add_option("--paths-out", paths_out, "binary dump of every path");

    auto* frontier = app.add_subcommand("frontier", "efficient frontier variance at (0, x0)");
    add_common(frontier, frontier_o, false);
    std::optional<double> expected;
    frontier->add_option("--expected", expected, "expected terminal wealth (default: pre-committed mean)");

    auto* ineff = app.add_subcommand("inefficiency", "variance gap to the efficient frontier");
    add_common(ineff, ineff_o, true);
    std::string ineff_policy;
    ineff->add_option("--policy", ineff_policy, "naive | precommitted | zero (default naive)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitParse;
    }

    try {
        if (*validate) return cmd_validate(validate_o, out);
        if (*weights) return cmd_weights(weights_o, which, points, out, err);
        if (*converge) return cmd_converge(converge_o, nmin, nmax, out, err);
        if (*simulate) return cmd_simulate(simulate_o, sim_policy, paths_out, out, err);
        if (*frontier) return cmd_frontier(frontier_o, expected, out, err);
        if (*ineff) return cmd_inefficiency(ineff_o, ineff_policy, out, err);
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const AssumptionViolation& e) {
        err << "assumption violated: " << e.what() << '\n';
        return kExitDomain;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const UnsupportedError& e) {
        err << "unsupported: " << e.what() << '\n';
        return kExitDomain;
    } catch (const ConvergenceError& e) {
        err << "convergence failure: " << e.what() << fmt::format(" (residual {:.3g} after {} iterations)\n",
                                                                   e.last_residual(), e.iterations());
        return kExitNumerical;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitParse;
}

// ---------------------------------------------------------------------------

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                          const std::vector<PlotSeries>& series, bool log_y) {
    constexpr double W = 720, H = 440, L = 70, R = 150, Top = 40, Bot = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (double v : x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (const auto& s : series) {
        for (double v : s.y) {
            if (log_y && !(v > 0.0)) continue;
            y0 = std::min(y0, ty(v));
            y1 = std::max(y1, ty(v));
        }
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - Bot - (ty(v) - y0) / (y1 - y0) * (H - Top - Bot); };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"24\" font-size=\"15\">{3}</text>\n",
        W, H, L, title);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n", L, Top,
                     W - L - R, H - Top - Bot);
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0;
        const double fy = y0 + (y1 - y0) * i / 4.0;
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", px(fx), H - Bot + 16,
                         fx);
        const double yv = log_y ? std::pow(10.0, fy) : fy;
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", L - 6.0,
                         H - Bot - (fy - y0) / (y1 - y0) * (H - Top - Bot) + 4.0, yv);
    }
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", L + (W - L - R) / 2,
                     H - 12.0, x_label);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* col = colors[k % 5];
        std::string pts;
        for (std::size_t i = 0; i < x.size() && i < series[k].y.size(); ++i) {
            if (log_y && !(series[k].y[i] > 0.0)) continue;
            pts += fmt::format("{:.2f},{:.2f} ", px(x[i]), py(series[k].y[i]));
        }
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"{}\"/>\n", col, pts);
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n", W - R + 10, Top + 16.0 * (k + 1),
                         col, series[k].name);
    }
    s += "</svg>\n";
    return s;
}

} // namespace naive_mv
