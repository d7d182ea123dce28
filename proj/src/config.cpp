#include "naive_mv/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace naive_mv {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double number(const std::string& text, std::size_t line, const std::string& key) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ParseError(line, fmt::format("{}: '{}' is not a number", key, t));
    }
    return v;
}

std::uint64_t unsigned_number(const std::string& text, std::size_t line, const std::string& key) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ParseError(line, fmt::format("{}: '{}' is not a non-negative integer", key, t));
    }
    return v;
}

Eigen::VectorXd vector_value(const std::string& text, std::size_t line, const std::string& key) {
    const auto parts = split(text, ',');
    Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(parts[i], line, key);
    return v;
}

Eigen::MatrixXd matrix_value(const std::string& text, std::size_t line, const std::string& key) {
    const auto rows = split(text, ';');
    std::vector<Eigen::VectorXd> parsed;
    for (const auto& r : rows) parsed.push_back(vector_value(r, line, key));
    const auto cols = parsed.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(parsed.size()), cols);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (parsed[i].size() != cols) throw ParseError(line, key + ": matrix rows differ in length");
        m.row(static_cast<Eigen::Index>(i)) = parsed[i].transpose();
    }
    return m;
}

struct Entry {
    std::string value;
    std::size_t line;
};

template <typename Value, typename Parse>
CoefficientCurve<Value> curve(const std::map<std::string, Entry>& kv, const std::string& key, Parse parse,
                              CoefficientCurve<Value> fallback) {
    const auto it = kv.find(key);
    const auto br = kv.find(key + ".breaks");
    if (it == kv.end()) {
        if (br != kv.end()) throw ParseError(br->second.line, key + ".breaks given without " + key);
        return fallback;
    }
    const auto pieces = split(it->second.value, '|');
    std::vector<Value> values;
    for (const auto& p : pieces) values.push_back(parse(p, it->second.line, key));
    std::vector<double> breaks;
    if (br != kv.end()) {
        for (const auto& b : split(br->second.value, ',')) breaks.push_back(number(b, br->second.line, key + ".breaks"));
    }
    if (values.size() != breaks.size() + 1) {
        throw ParseError(it->second.line, fmt::format("{}: {} pieces for {} breakpoints (need one more piece)", key,
                                                      values.size(), breaks.size()));
    }
    try {
        return CoefficientCurve<Value>::piecewise(std::move(breaks), std::move(values));
    } catch (const DomainError& e) {
        throw ParseError(it->second.line, key + ": " + e.what());
    }
}

const std::set<std::string> kKeys = {
    "horizon",        "risk_free",         "risk_free.breaks", "drift",          "drift.breaks",
    "volatility",     "volatility.breaks", "asset_count",      "target.kind",    "target.alpha",
    "target.k",       "target.rate",       "sim.seed",         "sim.paths",      "sim.steps",
    "sim.scheme",     "sim.initial_wealth", "sim.threads",     "output.dir",     "experiment.nmin",
    "experiment.nmax", "experiment.points", "experiment.case", "experiment.policy", "experiment.expected",
};

const std::set<std::string> kKinds = {"case1_alpha", "case2_k", "growth_factor", "wealth_target", "risk_aversion"};

} // namespace

RunConfig parse_config(std::istream& in) {
    std::map<std::string, Entry> kv;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ParseError(line, "missing key");
        if (!kKeys.count(key)) throw ParseError(line, "unknown key '" + key + "'");
        if (value.empty()) throw ParseError(line, "missing value for '" + key + "'");
        if (kv.count(key)) throw ParseError(line, "duplicate key '" + key + "'");
        kv.emplace(key, Entry{value, line});
    }

    RunConfig c;
    auto num = [&](const std::string& key, double& out) {
        if (auto it = kv.find(key); it != kv.end()) out = number(it->second.value, it->second.line, key);
    };
    auto uns = [&](const std::string& key, auto& out) {
        if (auto it = kv.find(key); it != kv.end()) {
            out = static_cast<std::decay_t<decltype(out)>>(unsigned_number(it->second.value, it->second.line, key));
        }
    };
    num("horizon", c.horizon);
    num("target.alpha", c.alpha);
    num("target.k", c.k);
    num("target.rate", c.rate);
    num("sim.initial_wealth", c.initial_wealth);
    uns("sim.seed", c.seed);
    uns("sim.paths", c.paths);
    uns("sim.steps", c.steps);
    uns("sim.threads", c.threads);

    c.risk_free = curve<double>(kv, "risk_free", number, c.risk_free);
    c.drift = curve<Eigen::VectorXd>(kv, "drift", vector_value, c.drift);
    c.volatility = curve<Eigen::MatrixXd>(kv, "volatility", matrix_value, c.volatility);

    c.asset_count = static_cast<std::size_t>(c.drift(0.0).size());
    if (auto it = kv.find("asset_count"); it != kv.end()) {
        const auto m = unsigned_number(it->second.value, it->second.line, "asset_count");
        if (m != c.asset_count) {
            throw ParseError(it->second.line,
                             fmt::format("asset_count = {} but drift has {} entries", m, c.asset_count));
        }
    }
    if (auto it = kv.find("volatility"); it != kv.end()) {
        const Eigen::MatrixXd s0 = c.volatility(0.0);
        if (s0.rows() != static_cast<Eigen::Index>(c.asset_count) || s0.cols() != s0.rows()) {
            throw ParseError(it->second.line, fmt::format("volatility must be {0}x{0}", c.asset_count));
        }
    }
    if (auto it = kv.find("target.kind"); it != kv.end()) {
        if (!kKinds.count(it->second.value)) {
            throw ParseError(it->second.line, "unknown target.kind '" + it->second.value + "'");
        }
        c.target_kind = it->second.value;
    }
    if (auto it = kv.find("sim.scheme"); it != kv.end()) {
        try {
            c.scheme = parse_scheme(it->second.value);
        } catch (const ConfigurationError& e) {
            throw ParseError(it->second.line, e.what());
        }
    }
    if (auto it = kv.find("output.dir"); it != kv.end()) c.output_dir = it->second.value;
    for (const auto& [key, e] : kv) {
        if (key.rfind("experiment.", 0) == 0) c.experiment[key.substr(11)] = e.value;
    }
    return c;
}

RunConfig parse_config_text(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open configuration file '" + path + "'");
    return parse_config(in);
}

MarketModel RunConfig::model() const { return MarketModel(horizon, risk_free, drift, volatility); }

TargetSpec RunConfig::target() const {
    if (target_kind == "case1_alpha") return TargetSpec::case1_alpha(alpha);
    if (target_kind == "case2_k") return TargetSpec::case2_k(k);
    const extended g = rate;
    const extended T = horizon;
    if (target_kind == "growth_factor") {
        return TargetSpec::growth_factor([g](extended u, extended v) { return std::exp(g * (v - u)); },
                                         fmt::format("f(u,v)=exp({}*(v-u))", rate),
                                         [g](extended u, extended v) { return -g * std::exp(g * (v - u)); });
    }
    if (target_kind == "wealth_target") {
        return TargetSpec::wealth_target([g, T](extended s, extended y) { return y * std::exp(g * (T - s)); },
                                         fmt::format("L(s,y)=y*exp({}*(T-s))", rate));
    }
    const extended a = alpha;
    return TargetSpec::risk_aversion([a](extended, extended y) { return a / y; }, fmt::format("alpha(s,y)={}/y", alpha));
}

SimConfig RunConfig::sim(double start) const {
    SimConfig s;
    s.grid = TimeGrid(start, horizon, steps);
    s.path_count = paths;
    s.seed = seed;
    s.scheme = scheme;
    s.initial_wealth = initial_wealth;
    s.threads = threads;
    return s;
}

std::optional<std::string> RunConfig::experiment_value(const std::string& key) const {
    if (auto it = experiment.find(key); it != experiment.end()) return it->second;
    return std::nullopt;
}

} // namespace naive_mv
