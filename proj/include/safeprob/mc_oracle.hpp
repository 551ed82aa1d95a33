#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "safeprob/distributions.hpp"
#include "safeprob/system_model.hpp"

namespace safeprob {

struct PathConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 0;
    Backend backend = Backend::openmp;

    void validate() const;
};

/// Seed of the per-path generator: a pure function of (seed, path index), so
/// ensembles do not depend on how paths are scheduled.
std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t path) noexcept;

enum class PathStatus : std::uint8_t { ok, infeasible, diverged };

inline constexpr double kNoEvent = std::numeric_limits<double>::infinity();

struct PathRecord {
    double min_phi = 0.0;
    double max_phi = 0.0;
    double exit_time = kNoEvent;   // first t with phi <= level
    double entry_time = kNoEvent;  // first t with phi >= level
    PathStatus status = PathStatus::ok;
};

struct PathEnsemble {
    std::vector<PathRecord> paths;
    double level = 0.0;
    double phi0 = 0.0;
    PathConfig config;
    std::size_t infeasible = 0;
    std::size_t diverged = 0;

    std::size_t included() const noexcept { return paths.size() - infeasible - diverged; }
};

/// Euler-Maruyama closed-loop simulation from x0, recording per-path running
/// min/max of phi and first crossings of bar.level() (linearly interpolated
/// inside the crossing step).
PathEnsemble simulate_paths(const ControlSystem& sys, const BarrierProblem& bar,
                            const Policy& policy, const Vec& x0, const PathConfig& cfg);

/// Empirical distribution of event samples with right-censoring at the horizon.
struct EmpiricalDistribution {
    std::vector<double> samples;  // sorted, uncensored events only
    std::size_t censored = 0;
    std::size_t total = 0;
    double delta = 0.05;
    double dkw_half_width = 0.0;

    /// Fraction of all included paths with sample <= x.
    double cdf(double x) const;
    /// Fraction with sample < x.
    double cdf_strict(double x) const;
    /// Fraction with sample >= x.
    double ccdf(double x) const;
    double censored_fraction() const { return total ? double(censored) / double(total) : 0.0; }
};

/// sqrt(ln(2/delta) / (2 n))
double dkw_half_width(std::size_t n, double delta);

EmpiricalDistribution empirical_ccdf_min(const PathEnsemble& ens, double delta = 0.05);
EmpiricalDistribution empirical_cdf_exit(const PathEnsemble& ens, double delta = 0.05);
EmpiricalDistribution empirical_cdf_max(const PathEnsemble& ens, double delta = 0.05);
EmpiricalDistribution empirical_cdf_entry(const PathEnsemble& ens, double delta = 0.05);

/// Tabulates `kind` on `times` from ensembles already simulated at `states`
/// (one ensemble per state, all at bar.level()).
DistributionResult empirical_from_ensembles(DistributionKind kind, const BarrierProblem& bar,
                                            std::span<const Vec> states,
                                            std::span<const PathEnsemble> ensembles,
                                            std::span<const double> times, double delta = 0.05);

/// Monte Carlo counterpart of a PDE result, on the given time grid, in the
/// same layout. F and Q are the complements of the passage-time CDFs.
DistributionResult empirical_result(DistributionKind kind, const ControlSystem& sys,
                                    const BarrierProblem& bar, const Policy& policy,
                                    std::span<const Vec> states, std::span<const double> times,
                                    const PathConfig& cfg, double delta = 0.05);

/// P(first hitting time of `level` <= t) for X = x0 + drift t + vol W.
double analytic_first_passage(double x0, double drift, double vol, double level, double t);
/// P(min_{[0,T]} X >= level).
double analytic_running_min_ccdf(double x0, double drift, double vol, double level, double t);
/// P(max_{[0,T]} X < level).
double analytic_running_max_cdf(double x0, double drift, double vol, double level, double t);

/// Closed-form counterpart of `kind` for phi(X) a Brownian motion with drift.
double analytic_distribution(DistributionKind kind, double phi0, double drift, double vol,
                             double level, double t);

struct TabulatedCdf {
    std::vector<double> grid;
    std::vector<double> values;
};

/// Sup-norm distance on a common grid.
double ks_distance(const TabulatedCdf& a, const TabulatedCdf& b);

}  // namespace safeprob
