#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "naive_mv/errors.hpp"

namespace naive_mv {

/// Deterministic coefficient t -> value on [0, T].
///
/// Three representations: a constant, a right-continuous step function on a
/// partition of [0, T], or an arbitrary named closed-form function. The first
/// two admit exact integrals; see integrate().
template <typename Value>
class CoefficientCurve {
public:
    struct Constant {
        Value value;
    };
    /// values[i] holds on [breaks[i-1], breaks[i]) with breaks[-1] = 0 and breaks[n] = T.
    struct Piecewise {
        std::vector<double> breaks;
        std::vector<Value> values;
    };
    struct Function {
        std::string name;
        std::function<Value(double)> fn;
    };

    CoefficientCurve() : rep_(Constant{Value{}}) {}

    static CoefficientCurve constant(Value v) { return CoefficientCurve(Constant{std::move(v)}); }

    static CoefficientCurve piecewise(std::vector<double> breaks, std::vector<Value> values) {
        if (values.size() != breaks.size() + 1) {
            throw DomainError("piecewise curve needs exactly one more value than breakpoints");
        }
        if (!std::is_sorted(breaks.begin(), breaks.end()) ||
            std::adjacent_find(breaks.begin(), breaks.end()) != breaks.end()) {
            throw DomainError("piecewise curve breakpoints must be strictly increasing");
        }
        if (breaks.empty()) return constant(std::move(values.front()));
        return CoefficientCurve(Piecewise{std::move(breaks), std::move(values)});
    }

    static CoefficientCurve function(std::string name, std::function<Value(double)> fn) {
        return CoefficientCurve(Function{std::move(name), std::move(fn)});
    }

    Value operator()(double t) const {
        return std::visit(
            [t](const auto& rep) -> Value {
                using R = std::decay_t<decltype(rep)>;
                if constexpr (std::is_same_v<R, Constant>) {
                    return rep.value;
                } else if constexpr (std::is_same_v<R, Piecewise>) {
                    auto it = std::upper_bound(rep.breaks.begin(), rep.breaks.end(), t);
                    return rep.values[static_cast<std::size_t>(it - rep.breaks.begin())];
                } else {
                    return rep.fn(t);
                }
            },
            rep_);
    }

    bool is_constant() const { return std::holds_alternative<Constant>(rep_); }
    bool is_step() const { return !std::holds_alternative<Function>(rep_); }

    /// Interior breakpoints (empty unless piecewise).
    std::vector<double> breaks() const {
        if (const auto* p = std::get_if<Piecewise>(&rep_)) return p->breaks;
        return {};
    }

    std::string describe() const {
        if (std::holds_alternative<Constant>(rep_)) return "constant";
        if (const auto* p = std::get_if<Piecewise>(&rep_)) {
            return "piecewise(" + std::to_string(p->values.size()) + " pieces)";
        }
        return std::get<Function>(rep_).name;
    }

private:
    explicit CoefficientCurve(std::variant<Constant, Piecewise, Function> rep) : rep_(std::move(rep)) {}

    std::variant<Constant, Piecewise, Function> rep_;
};

using ScalarCurve = CoefficientCurve<double>;
using VectorCurve = CoefficientCurve<Eigen::VectorXd>;
using MatrixCurve = CoefficientCurve<Eigen::MatrixXd>;

/// Composite Simpson on [a, b] with an even number of panels (at least 2).
template <typename F>
long double simpson(F&& f, long double a, long double b, std::size_t panels) {
    if (b <= a) return 0.0L;
    panels = std::max<std::size_t>(2, panels + (panels % 2));
    const long double h = (b - a) / static_cast<long double>(panels);
    long double acc = static_cast<long double>(f(a)) + static_cast<long double>(f(b));
    for (std::size_t i = 1; i < panels; ++i) {
        const long double x = a + h * static_cast<long double>(i);
        acc += (i % 2 == 1 ? 4.0L : 2.0L) * static_cast<long double>(f(x));
    }
    return acc * h / 3.0L;
}

} // namespace naive_mv
