#include "safeprob/summary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "safeprob/errors.hpp"

namespace safeprob {

namespace {

double interpolate_cdf(std::span<const double> grid, std::span<const double> cdf, double x) {
    if (x <= grid.front()) return cdf.front();
    if (x >= grid.back()) return cdf.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - grid.begin());
    const double w = (x - grid[j - 1]) / (grid[j] - grid[j - 1]);
    return cdf[j - 1] + w * (cdf[j] - cdf[j - 1]);
}

}  // namespace

SummaryStats summary_stats(std::span<const double> grid, std::span<const double> cdf,
                           const SummaryOptions& options) {
    if (grid.empty() || grid.size() != cdf.size()) {
        throw DataError("summary_stats: grid and CDF must be non-empty and the same length");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw DataError("summary_stats: grid is not increasing");
        if (cdf[i] < cdf[i - 1] - options.monotone_tolerance) {
            std::ostringstream os;
            os << "summary_stats: CDF decreases by " << cdf[i - 1] - cdf[i] << " at " << grid[i];
            throw DataError(os.str());
        }
    }

    SummaryStats out;
    for (double p : options.quantile_levels) {
        Quantile q{p, std::nullopt};
        if (cdf.front() >= p) {
            q.value = grid.front();
        } else {
            for (std::size_t i = 1; i < grid.size(); ++i) {
                if (cdf[i] >= p) {
                    const double w = (p - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
                    q.value = grid[i - 1] + w * (grid[i] - grid[i - 1]);
                    break;
                }
            }
        }
        out.quantiles.push_back(q);
    }

    double integral = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        integral += 0.5 * ((1.0 - cdf[i]) + (1.0 - cdf[i - 1])) * (grid[i] - grid[i - 1]);
    }
    out.mean = grid.front() + integral;
    out.residual_mass = std::max(0.0, 1.0 - cdf.back());
    out.mean_is_lower_bound = out.residual_mass > options.saturation_tolerance;

    const std::span<const double> points =
        options.tail_points.empty() ? grid : std::span<const double>(options.tail_points);
    for (double x : points) out.tail_probabilities.emplace_back(x, 1.0 - interpolate_cdf(grid, cdf, x));
    return out;
}

SummaryStats summary_stats(const DistributionResult& result, std::size_t state_index,
                           const SummaryOptions& options) {
    if (state_index >= result.values.size()) throw DataError("summary_stats: state index out of range");
    const std::vector<double>& v = result.values[state_index];
    if (is_increasing_in_time(result.kind)) return summary_stats(result.times, v, options);
    std::vector<double> cdf(v.size());
    std::transform(v.begin(), v.end(), cdf.begin(), [](double s) { return 1.0 - s; });
    return summary_stats(result.times, cdf, options);
}

}  // namespace safeprob
