#include "safeprob/distributions.hpp"

#include <cmath>
#include <sstream>

#include "safeprob/errors.hpp"
#include "safeprob/hash.hpp"

namespace safeprob {

std::string_view to_string(DistributionKind kind) {
    switch (kind) {
    case DistributionKind::invariance_ccdf: return "invariance_ccdf";
    case DistributionKind::exit_cdf: return "exit_cdf";
    case DistributionKind::convergence_cdf: return "convergence_cdf";
    case DistributionKind::entry_cdf: return "entry_cdf";
    }
    return "unknown";
}

DistributionKind distribution_kind_from_string(std::string_view name) {
    for (auto k : {DistributionKind::invariance_ccdf, DistributionKind::exit_cdf,
                   DistributionKind::convergence_cdf, DistributionKind::entry_cdf}) {
        if (to_string(k) == name) return k;
    }
    throw PreconditionError("unknown distribution kind '" + std::string(name) + "'");
}

Side pde_side(DistributionKind kind) noexcept {
    return kind == DistributionKind::invariance_ccdf || kind == DistributionKind::exit_cdf
               ? Side::super
               : Side::sub;
}

double boundary_value(DistributionKind kind) noexcept {
    return kind == DistributionKind::exit_cdf || kind == DistributionKind::entry_cdf ? 1.0 : 0.0;
}

bool is_increasing_in_time(DistributionKind kind) noexcept { return boundary_value(kind) == 1.0; }

IbvpProblem make_problem(DistributionKind kind, const ControlSystem& sys, const BarrierProblem& bar,
                         const Policy& policy, double level) {
    if (sys.dim_state() != bar.dim_state()) {
        throw ShapeError("barrier and system state dimensions differ");
    }
    const Side side = pde_side(kind);
    const BarrierProblem leveled = bar.with_level(level);
    IbvpProblem p;
    p.dim = sys.dim_state();
    p.convection = closed_loop_drift(sys, leveled, policy);
    p.diffusion = diffusion_tensor(sys);
    p.interior = [leveled, side](const Vec& x) {
        return is_interior(leveled.value(x), leveled.level(), side);
    };
    p.dirichlet_value = boundary_value(kind);
    // Indicator of the interior for F and Q; of the complement for G and N.
    p.interior_initial = 1.0 - p.dirichlet_value;
    return p;
}

namespace {

std::string numerics_fingerprint(DistributionKind kind, const QuerySpec& q) {
    std::ostringstream os;
    os.precision(17);
    os << to_string(kind) << '|' << q.level << '|' << q.horizon << '|' << q.numerics.dt << '|'
       << q.numerics.theta << '|' << q.numerics.snapshot_every << '|' << q.numerics.mollify;
    for (const Axis& a : q.numerics.grid.axes()) os << '|' << a.lower << ',' << a.upper << ',' << a.cells;
    for (const Vec& x : q.states) os << '|' << format_state(x);
    return os.str();
}

}  // namespace

DistributionResult solve_distribution(DistributionKind kind, const ControlSystem& sys,
                                      const BarrierProblem& bar, const Policy& policy,
                                      const QuerySpec& q) {
    if (!(q.horizon >= 0.0)) throw PreconditionError("query horizon must be non-negative");
    const GridSpec& grid = q.numerics.grid;
    if (grid.dim() != sys.dim_state()) throw ShapeError("grid and state dimensions differ");
    for (const Vec& x : q.states) {
        if (!grid.contains(x)) {
            throw PreconditionError("query state " + format_state(x) + " lies outside the grid box");
        }
    }

    const IbvpProblem problem = make_problem(kind, sys, bar, policy, q.level);
    MarchConfig march;
    march.horizon = q.horizon;
    march.dt = q.numerics.dt;
    march.theta = q.numerics.theta;
    march.snapshot_every = q.numerics.snapshot_every;
    march.tolerance = q.numerics.tolerance;
    march.mollify = q.numerics.mollify;
    march.backend = q.numerics.backend;

    BoundaryProbe probe;
    probe.points = q.states;
    probe.tolerance = q.numerics.boundary_tolerance;
    const FieldSeries series =
        solve_problem(problem, grid, march, q.numerics.boundary_probe ? &probe : nullptr);

    DistributionResult r;
    r.kind = kind;
    r.level = q.level;
    r.times = series.times;
    r.states = q.states;
    r.diagnostics = series.diagnostics;
    r.provenance.config_hash = hash_hex(numerics_fingerprint(kind, q));
    r.grid = grid;
    r.final_field = series.snapshots.back();

    const BarrierProblem leveled = bar.with_level(q.level);
    for (const Vec& x : q.states) {
        r.augmented.push_back(augment_state(leveled, x));
        std::vector<double> row(series.times.size());
        if (!problem.interior(x)) {
            std::ostringstream os;
            os << "state " << format_state(x) << " is outside the "
               << (pde_side(kind) == Side::super ? "super" : "sub")
               << "-level set; " << to_string(kind) << " equals its boundary value "
               << problem.dirichlet_value;
            r.warnings.push_back(os.str());
            std::fill(row.begin(), row.end(), problem.dirichlet_value);
        } else {
            for (std::size_t s = 0; s < series.times.size(); ++s) row[s] = series.value_at(s, x);
        }
        r.values.push_back(std::move(row));
    }
    if (r.diagnostics.boundary_flag) {
        r.warnings.push_back("box-doubling sensitivity " +
                             std::to_string(*r.diagnostics.boundary_sensitivity) +
                             " exceeds tolerance");
    }
    return r;
}

DistributionResult invariance_ccdf(const ControlSystem& sys, const BarrierProblem& bar,
                                   const Policy& policy, const QuerySpec& q) {
    return solve_distribution(DistributionKind::invariance_ccdf, sys, bar, policy, q);
}

DistributionResult exit_time_cdf(const ControlSystem& sys, const BarrierProblem& bar,
                                 const Policy& policy, const QuerySpec& q) {
    return solve_distribution(DistributionKind::exit_cdf, sys, bar, policy, q);
}

DistributionResult convergence_cdf(const ControlSystem& sys, const BarrierProblem& bar,
                                   const Policy& policy, const QuerySpec& q) {
    return solve_distribution(DistributionKind::convergence_cdf, sys, bar, policy, q);
}

DistributionResult entry_time_cdf(const ControlSystem& sys, const BarrierProblem& bar,
                                  const Policy& policy, const QuerySpec& q) {
    return solve_distribution(DistributionKind::entry_cdf, sys, bar, policy, q);
}

std::vector<DistributionResult> level_sweep(DistributionKind kind, const ControlSystem& sys,
                                            const BarrierProblem& bar, const Policy& policy,
                                            const QuerySpec& q, std::span<const double> levels) {
    std::vector<DistributionResult> out;
    out.reserve(levels.size());
    for (double level : levels) {
        QuerySpec ql = q;
        ql.level = level;
        out.push_back(solve_distribution(kind, sys, bar, policy, ql));
    }
    return out;
}

DistributionResult solve_at_augmented(DistributionKind kind, const ControlSystem& sys,
                                      const BarrierProblem& bar, const Policy& policy,
                                      std::span<const Vec> z, QuerySpec q) {
    q.states.clear();
    for (const Vec& zi : z) {
        if (zi.size() != sys.dim_state() + 1) throw ShapeError("augmented state has wrong size");
        const Vec x = zi.tail(sys.dim_state());
        const double phi = bar.value(x);
        if (std::abs(zi[0] - phi) > 1e-9 * std::max(1.0, std::abs(phi))) {
            throw DomainError("augmented point " + format_state(zi) +
                              " is off the manifold z[0] = phi(x)");
        }
        q.states.push_back(x);
    }
    return solve_distribution(kind, sys, bar, policy, q);
}

}  // namespace safeprob
