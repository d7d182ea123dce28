#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace naive_mv {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitDomain = 1,    // domain error or failed assumption / dominance check
    kExitParse = 2,     // malformed configuration or command line
    kExitNumerical = 3, // non-convergence or an inconsistent numerical setup
};

/// Entry point of `naive-mv validate|weights|converge|simulate|frontier|inefficiency`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct PlotSeries {
    std::string name;
    std::vector<double> y;
};

/// Minimal SVG line chart of the given series against x.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                          const std::vector<PlotSeries>& series, bool log_y = false);

} // namespace naive_mv
