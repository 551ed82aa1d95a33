#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "safeprob/grid.hpp"
#include "safeprob/kernels.hpp"
#include "safeprob/linalg.hpp"

namespace safeprob {

class BarrierProblem;

/// Which side of the level set the PDE runs on: {phi >= level} or {phi < level}.
enum class Side { super, sub };

using Mask = std::vector<std::uint8_t>;

bool is_interior(double phi, double level, Side side) noexcept;

Mask build_mask(const GridSpec& grid, const BarrierProblem& bar, Side side);

struct SolverTolerance {
    double residual = 1e-10;
    int max_iterations = 10000;
};

struct MarchConfig {
    double horizon = 0.0;
    double dt = 1e-3;
    double theta = 1.0;       // 1 = backward Euler, 0.5 = Crank-Nicolson
    int snapshot_every = 1;   // in time steps; t = 0 and t = horizon are always kept
    SolverTolerance tolerance;
    bool mollify = false;     // average indicator data on the first interior layer
    Backend backend = Backend::openmp;
};

/// Discretized convection-diffusion problem
///   dF/dt = 1/2 div(Sigma grad F) + (mu - 1/2 div Sigma) . grad F
/// on interior nodes, F pinned to `dirichlet_value` elsewhere.
struct IbvpSpec {
    GridSpec grid;
    Mask interior;
    std::vector<double> convection;  // grid.dim() values per node
    std::vector<double> diffusion;   // grid.dim()^2 values per node, row-major
    double dirichlet_value = 0.0;
    std::vector<double> initial;
    MarchConfig march;
    // Classifies points just outside the box. A face neighbour that is not
    // interior is a Dirichlet ghost; otherwise the face is zero-gradient.
    // Empty means every face is zero-gradient.
    StatePredicate ghost_interior;

    void validate() const;
};

/// Spatial operator L with Dirichlet ghosts folded into a source term:
///   (L F)_i = sum_j op_ij F_j + dirichlet_weight_i * dirichlet_value.
/// Rows of masked-out nodes are empty.
struct SpatialOperator {
    CsrMatrix op;
    std::vector<double> dirichlet_weight;
    bool monotone = true;  // all off-diagonal coefficients non-negative
};

SpatialOperator assemble_operator(const IbvpSpec& spec);

struct Diagnostics {
    double min_value = 0.0;
    double max_value = 0.0;
    double max_residual = 0.0;
    long total_iterations = 0;
    int max_iterations_per_step = 0;
    int steps = 0;
    double dt = 0.0;
    bool monotone_stencil = true;
    std::optional<double> boundary_sensitivity;
    double boundary_tolerance = 1e-3;
    bool boundary_flag = false;
};

struct FieldSeries {
    GridSpec grid;
    std::vector<double> times;
    std::vector<std::vector<double>> snapshots;
    Diagnostics diagnostics;

    double value_at(std::size_t snapshot, const Vec& x) const;
};

/// Holds the assembled theta-scheme matrices for a fixed step size.
class ThetaStepper {
public:
    ThetaStepper(const IbvpSpec& spec, double dt);

    /// Advances one step; throws SolverError when the solve does not converge.
    void advance(std::span<const double> in, std::span<double> out, double t);

    const KrylovResult& last_solve() const noexcept { return last_; }
    bool monotone() const noexcept { return monotone_; }

private:
    const IbvpSpec* spec_;
    double dt_;
    CsrMatrix implicit_;
    CsrMatrix explicit_;
    std::vector<double> source_;
    std::vector<double> rhs_;
    bool has_explicit_ = false;
    bool monotone_ = true;
    KrylovResult last_;
};

/// One step of size spec.march.dt starting from time t.
std::vector<double> step(const IbvpSpec& spec, std::span<const double> field_in, double t);

FieldSeries solve_ibvp(const IbvpSpec& spec);

/// Snapshot times solve_ibvp records for a horizon, nominal step and cadence.
std::vector<double> snapshot_times(double horizon, double dt, int snapshot_every);

/// Continuous description from which IbvpSpecs are sampled on any grid.
struct IbvpProblem {
    int dim = 1;
    VectorField convection;
    MatrixField diffusion;
    StatePredicate interior;
    double dirichlet_value = 0.0;
    double interior_initial = 1.0;
};

IbvpSpec discretize(const IbvpProblem& problem, const GridSpec& grid, const MarchConfig& march);

struct BoundaryProbe {
    std::vector<Vec> points;
    double tolerance = 1e-3;
};

/// Max change at the probe points between a coarse solve on the box and on
/// the doubled box.
double boundary_sensitivity(const IbvpProblem& problem, const GridSpec& grid,
                            const MarchConfig& march, std::span<const Vec> points);

/// discretize + solve_ibvp, with the box-doubling diagnostic when `probe` is set.
FieldSeries solve_problem(const IbvpProblem& problem, const GridSpec& grid,
                          const MarchConfig& march, const BoundaryProbe* probe = nullptr);

}  // namespace safeprob
