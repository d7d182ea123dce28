#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "naive_mv/errors.hpp"

namespace naive_mv {

/// Uniform grid start = t_0 < ... < t_N = end.
class TimeGrid {
public:
    TimeGrid(double start, double end, std::size_t steps);

    double start() const { return start_; }
    double end() const { return end_; }
    std::size_t steps() const { return steps_; }
    std::size_t points() const { return steps_ + 1; }
    double step() const { return (end_ - start_) / static_cast<double>(steps_); }

    /// t_i, with t_N returned as exactly end().
    double time(std::size_t i) const;
    std::vector<double> times() const;

    /// True when every dyadic point start + k (end - start) / 2^n is a grid node.
    bool dyadic_aligned(unsigned n) const;
    /// Throws ConfigurationError unless dyadic_aligned(n).
    void require_dyadic(unsigned n) const;
    /// Largest n with dyadic_aligned(n).
    unsigned dyadic_depth() const;

private:
    double start_;
    double end_;
    std::size_t steps_;
};

} // namespace naive_mv
