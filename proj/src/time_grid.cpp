#include "naive_mv/time_grid.hpp"

#include <cmath>
#include <string>

namespace naive_mv {

TimeGrid::TimeGrid(double start, double end, std::size_t steps) : start_(start), end_(end), steps_(steps) {
    if (steps_ < 1) throw ConfigurationError("time grid needs at least one step");
    if (!(end_ > start_) || !std::isfinite(start_) || !std::isfinite(end_)) {
        throw ConfigurationError("time grid needs start < end");
    }
}

double TimeGrid::time(std::size_t i) const {
    if (i == steps_) return end_;
    if (i > steps_) throw ConfigurationError("grid index out of range");
    return start_ + (end_ - start_) * static_cast<double>(i) / static_cast<double>(steps_);
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> t(points());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = time(i);
    return t;
}

bool TimeGrid::dyadic_aligned(unsigned n) const {
    if (n >= 63) return false;
    const std::uint64_t intervals = std::uint64_t{1} << n;
    return steps_ % intervals == 0;
}

void TimeGrid::require_dyadic(unsigned n) const {
    if (!dyadic_aligned(n)) {
        throw ConfigurationError("grid with " + std::to_string(steps_) + " steps is not aligned to 2^" +
                                 std::to_string(n) + " dyadic intervals (max depth " +
                                 std::to_string(dyadic_depth()) + ")");
    }
}

unsigned TimeGrid::dyadic_depth() const {
    unsigned n = 0;
    while (dyadic_aligned(n + 1)) ++n;
    return n;
}

} // namespace naive_mv
