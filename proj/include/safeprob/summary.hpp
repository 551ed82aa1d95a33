#pragma once

#include <optional>
#include <span>
#include <vector>

#include "safeprob/distributions.hpp"

namespace safeprob {

struct SummaryOptions {
    std::vector<double> quantile_levels{0.05, 0.25, 0.5, 0.75, 0.95};
    std::vector<double> tail_points;     // abscissae for 1 - CDF; empty = the tabulated grid
    double monotone_tolerance = 1e-7;
    double saturation_tolerance = 1e-6;
};

struct Quantile {
    double probability = 0.0;
    std::optional<double> value;  // empty when the CDF never reaches the probability
};

struct SummaryStats {
    std::vector<Quantile> quantiles;
    /// Trapezoidal integral of 1 - CDF over the tabulated range, plus the
    /// grid origin. A lower bound on the mean unless the CDF saturates.
    double mean = 0.0;
    bool mean_is_lower_bound = false;
    double residual_mass = 0.0;  // 1 - CDF at the last abscissa
    std::vector<std::pair<double, double>> tail_probabilities;  // (x, 1 - CDF(x))
};

/// Summary of a CDF tabulated on an increasing grid.
SummaryStats summary_stats(std::span<const double> grid, std::span<const double> cdf,
                           const SummaryOptions& options = {});

/// First-passage-time summary for one state of a time-tabulated result.
/// F and Q are survival functions of the exit/entry time and are converted.
SummaryStats summary_stats(const DistributionResult& result, std::size_t state_index,
                           const SummaryOptions& options = {});

}  // namespace safeprob
