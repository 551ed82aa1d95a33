#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "safeprob/pde_engine.hpp"
#include "safeprob/system_model.hpp"

namespace safeprob {

inline constexpr std::string_view kSolverVersion = "safeprob 1.0.0";

/// The four first-passage quantities of phi(X_t) with respect to a level.
enum class DistributionKind {
    invariance_ccdf,  // F(T) = P(min_{[0,T]} phi >= level)
    exit_cdf,         // G(t) = P(first time phi <= level is <= t)
    convergence_cdf,  // Q(T) = P(max_{[0,T]} phi < level)
    entry_cdf,        // N(t) = P(first time phi >= level is <= t)
};

std::string_view to_string(DistributionKind kind);
DistributionKind distribution_kind_from_string(std::string_view name);

/// Side of the level set on which the kind's PDE runs, and its boundary value.
Side pde_side(DistributionKind kind) noexcept;
double boundary_value(DistributionKind kind) noexcept;
/// True for the CDFs in time (G, N), false for the survival-type F, Q.
bool is_increasing_in_time(DistributionKind kind) noexcept;

struct NumericsConfig {
    GridSpec grid;
    double dt = 1e-3;
    double theta = 1.0;
    int snapshot_every = 10;
    SolverTolerance tolerance;
    bool mollify = false;
    Backend backend = Backend::openmp;
    bool boundary_probe = false;
    double boundary_tolerance = 1e-3;
};

struct QuerySpec {
    std::vector<Vec> states;
    double level = 0.0;
    double horizon = 1.0;
    NumericsConfig numerics;
};

struct Provenance {
    std::string config_hash;
    std::string solver_version{kSolverVersion};
    std::string source = "pde";  // "pde", "mc" or "analytic"
};

/// Tabulated distribution values[state][time] for one level.
struct DistributionResult {
    DistributionKind kind = DistributionKind::invariance_ccdf;
    double level = 0.0;
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> augmented;  // z = [phi(x); x] per state
    std::vector<std::vector<double>> values;
    std::vector<double> band;    // per-state confidence half-width (empirical results only)
    Diagnostics diagnostics;
    std::vector<std::string> warnings;
    Provenance provenance;
    // Final snapshot over the whole grid (PDE results only).
    std::optional<GridSpec> grid;
    std::vector<double> final_field;
};

/// Convection-diffusion problem whose solution is the requested distribution:
/// interior {phi >= l} (F, G) or {phi < l} (Q, N), drift f + gK, diffusion
/// sigma sigma^T, indicator initial data.
IbvpProblem make_problem(DistributionKind kind, const ControlSystem& sys, const BarrierProblem& bar,
                         const Policy& policy, double level);

DistributionResult solve_distribution(DistributionKind kind, const ControlSystem& sys,
                                      const BarrierProblem& bar, const Policy& policy,
                                      const QuerySpec& q);

DistributionResult invariance_ccdf(const ControlSystem& sys, const BarrierProblem& bar,
                                   const Policy& policy, const QuerySpec& q);
DistributionResult exit_time_cdf(const ControlSystem& sys, const BarrierProblem& bar,
                                 const Policy& policy, const QuerySpec& q);
DistributionResult convergence_cdf(const ControlSystem& sys, const BarrierProblem& bar,
                                   const Policy& policy, const QuerySpec& q);
DistributionResult entry_time_cdf(const ControlSystem& sys, const BarrierProblem& bar,
                                  const Policy& policy, const QuerySpec& q);

/// One solve per level; results share states and times.
std::vector<DistributionResult> level_sweep(DistributionKind kind, const ControlSystem& sys,
                                            const BarrierProblem& bar, const Policy& policy,
                                            const QuerySpec& q, std::span<const double> levels);

/// Queries by augmented coordinate. Each z must lie on the manifold
/// z[0] = phi(z[1:]); other points have no probabilistic meaning.
DistributionResult solve_at_augmented(DistributionKind kind, const ControlSystem& sys,
                                      const BarrierProblem& bar, const Policy& policy,
                                      std::span<const Vec> z, QuerySpec q);

}  // namespace safeprob
