#include "safeprob/pde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "safeprob/errors.hpp"
#include "safeprob/system_model.hpp"

namespace safeprob {

bool is_interior(double phi, double level, Side side) noexcept {
    return side == Side::super ? phi >= level : phi < level;
}

namespace {

// Runs body(i) for every node, in parallel, rethrowing the first exception.
template <class Body>
void for_each_node(std::size_t count, Body&& body) {
    std::exception_ptr failure;
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(safeprob_node_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

Mask build_mask(const GridSpec& grid, const BarrierProblem& bar, Side side) {
    if (bar.dim_state() != grid.dim()) throw ShapeError("barrier and grid dimensions differ");
    Mask mask(grid.node_count());
    for_each_node(grid.node_count(), [&](std::size_t i) {
        mask[i] = is_interior(bar.value(grid.coord(i)), bar.level(), side) ? 1 : 0;
    });
    return mask;
}

void IbvpSpec::validate() const {
    const std::size_t n = grid.node_count();
    const auto d = static_cast<std::size_t>(grid.dim());
    if (interior.size() != n || initial.size() != n || convection.size() != n * d ||
        diffusion.size() != n * d * d) {
        throw ShapeError("IBVP fields do not match the grid");
    }
    if (!(march.horizon >= 0.0)) throw PreconditionError("horizon must be non-negative");
    if (!(march.dt > 0.0)) throw PreconditionError("dt must be positive");
    if (!(march.theta >= 0.5 && march.theta <= 1.0)) {
        throw PreconditionError("theta must lie in [0.5, 1]");
    }
    if (march.snapshot_every < 1) throw PreconditionError("snapshot_every must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
        const double v = initial[i];
        if (!march.mollify && v != 0.0 && v != 1.0) {
            throw PreconditionError("initial field must be an indicator (values in {0,1})");
        }
        if (!interior[i] && v != dirichlet_value) {
            throw PreconditionError("initial field disagrees with Dirichlet data at node " +
                                    std::to_string(i));
        }
        const double* s = &diffusion[i * d * d];
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = a + 1; b < d; ++b) {
                const double x = s[a * d + b], y = s[b * d + a];
                if (std::abs(x - y) > 1e-12 * std::max({1.0, std::abs(x), std::abs(y)})) {
                    throw PreconditionError("diffusion tensor is not symmetric at node " +
                                            std::to_string(i));
                }
            }
        }
    }
}

namespace {

struct Entry {
    std::int64_t col;
    double coef;
};

// Row builder in difference form: each term c * (F_target - F_self).
class RowBuilder {
public:
    explicit RowBuilder(std::size_t self) : self_(self) {}

    void to_node(std::size_t j, double c) {
        if (j == self_ || c == 0.0) return;
        for (Entry& e : entries_) {
            if (e.col == static_cast<std::int64_t>(j)) {
                e.coef += c;
                diag_ -= c;
                return;
            }
        }
        entries_.push_back({static_cast<std::int64_t>(j), c});
        diag_ -= c;
    }

    void to_dirichlet(double c) {
        dirichlet_ += c;
        diag_ -= c;
    }

    void emit(CsrMatrix& m, bool& monotone) {
        entries_.push_back({static_cast<std::int64_t>(self_), diag_});
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& l, const Entry& r) { return l.col < r.col; });
        double scale = std::abs(diag_);
        for (const Entry& e : entries_) {
            if (e.col != static_cast<std::int64_t>(self_) && e.coef < -1e-12 * scale) {
                monotone = false;
            }
            m.col.push_back(e.col);
            m.val.push_back(e.coef);
        }
        if (dirichlet_ < -1e-12 * scale) monotone = false;
        m.row_ptr.push_back(static_cast<std::int64_t>(m.col.size()));
    }

    double dirichlet() const noexcept { return dirichlet_; }

private:
    std::size_t self_;
    std::vector<Entry> entries_;
    double diag_ = 0.0;
    double dirichlet_ = 0.0;
};

struct Neighbour {
    bool dirichlet = false;
    std::size_t node = 0;
};

class NeighbourResolver {
public:
    NeighbourResolver(const GridSpec& grid, const StatePredicate& ghost_interior)
        : grid_(grid), ghost_interior_(ghost_interior) {}

    Neighbour resolve(const MultiIndex& base, const MultiIndex& offset) const {
        MultiIndex mi = base;
        bool outside = false;
        for (int a = 0; a < grid_.dim(); ++a) {
            mi[a] += offset[a];
            if (mi[a] < 0 || mi[a] >= grid_.axis(a).nodes()) outside = true;
        }
        if (!outside) return {false, grid_.index(mi)};
        if (ghost_interior_) {
            Vec p(grid_.dim());
            for (int a = 0; a < grid_.dim(); ++a) p[a] = grid_.axis(a).coord(mi[a]);
            if (!ghost_interior_(p)) return {true, 0};
        }
        for (int a = 0; a < grid_.dim(); ++a) {
            mi[a] = std::clamp(mi[a], 0, grid_.axis(a).nodes() - 1);
        }
        return {false, grid_.index(mi)};
    }

private:
    const GridSpec& grid_;
    const StatePredicate& ghost_interior_;
};

}  // namespace

SpatialOperator assemble_operator(const IbvpSpec& spec) {
    spec.validate();
    const GridSpec& grid = spec.grid;
    const int d = grid.dim();
    const auto dd = static_cast<std::size_t>(d * d);
    const std::size_t n = grid.node_count();
    const NeighbourResolver resolver(grid, spec.ghost_interior);

    auto sigma = [&](std::size_t node, int a, int b) { return spec.diffusion[node * dd + a * d + b]; };

    SpatialOperator out;
    out.op.rows = n;
    out.op.row_ptr.reserve(n + 1);
    out.dirichlet_weight.assign(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        RowBuilder row(i);
        if (spec.interior[i]) {
            const MultiIndex mi = grid.multi_index(i);
            auto add = [&](const MultiIndex& off, double c) {
                const Neighbour nb = resolver.resolve(mi, off);
                if (nb.dirichlet) row.to_dirichlet(c);
                else row.to_node(nb.node, c);
            };
            for (int a = 0; a < d; ++a) {
                const double h = grid.axis(a).spacing();
                MultiIndex up{}, down{};
                up[a] = 1;
                down[a] = -1;
                const bool has_up = mi[a] + 1 < grid.axis(a).nodes();
                const bool has_down = mi[a] > 0;
                const std::size_t iu = has_up ? i + grid.stride(a) : i;
                const std::size_t id = has_down ? i - grid.stride(a) : i;

                // Conservative 1/2 d_a(Sigma_aa d_a F) with face-averaged coefficients.
                const double s0 = sigma(i, a, a);
                const double s_up = 0.5 * (s0 + sigma(iu, a, a));
                const double s_down = 0.5 * (s0 + sigma(id, a, a));
                add(up, 0.5 * s_up / (h * h));
                add(down, 0.5 * s_down / (h * h));

                // The conservative stencil already carries 1/2 (d_a Sigma_aa) d_a F,
                // so only that part of 1/2 div(Sigma) is removed from the drift.
                double dsigma = 0.0;
                if (has_up && has_down) dsigma = (sigma(iu, a, a) - sigma(id, a, a)) / (2.0 * h);
                else if (has_up) dsigma = (sigma(iu, a, a) - s0) / h;
                else if (has_down) dsigma = (s0 - sigma(id, a, a)) / h;
                const double velocity = spec.convection[i * d + a] - 0.5 * dsigma;
                if (velocity > 0.0) add(up, velocity / h);
                else if (velocity < 0.0) add(down, -velocity / h);
            }
            for (int a = 0; a < d; ++a) {
                for (int b = a + 1; b < d; ++b) {
                    const double s = 0.5 * (sigma(i, a, b) + sigma(i, b, a));
                    if (s == 0.0) continue;
                    const double w = std::abs(s) / (2.0 * grid.axis(a).spacing() *
                                                     grid.axis(b).spacing());
                    const int sb = s > 0.0 ? 1 : -1;
                    MultiIndex pp{}, mm{}, pa{}, ma{}, pb{}, mb{};
                    pp[a] = 1; pp[b] = sb;
                    mm[a] = -1; mm[b] = -sb;
                    pa[a] = 1; ma[a] = -1;
                    pb[b] = 1; mb[b] = -1;
                    add(pp, w);
                    add(mm, w);
                    add(pa, -w);
                    add(ma, -w);
                    add(pb, -w);
                    add(mb, -w);
                }
            }
        }
        row.emit(out.op, out.monotone);
        out.dirichlet_weight[i] = row.dirichlet();
    }
    return out;
}

namespace {

// I + scale * L on interior rows. Masked-out rows stay empty; the caller
// overwrites them with Dirichlet data.
CsrMatrix identity_plus(const CsrMatrix& op, double scale) {
    CsrMatrix m = op;
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (auto j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) {
            m.val[j] *= scale;
            if (static_cast<std::size_t>(m.col[j]) == r) m.val[j] += 1.0;
        }
    }
    return m;
}

}  // namespace

ThetaStepper::ThetaStepper(const IbvpSpec& spec, double dt) : spec_(&spec), dt_(dt) {
    const SpatialOperator l = assemble_operator(spec);
    monotone_ = l.monotone;
    const double theta = spec.march.theta;
    const std::size_t n = spec.grid.node_count();

    // Build A = I - theta dt L; masked-out rows get an explicit unit diagonal.
    CsrMatrix a;
    a.rows = n;
    a.row_ptr.reserve(n + 1);
    for (std::size_t r = 0; r < n; ++r) {
        if (!spec.interior[r]) {
            a.col.push_back(static_cast<std::int64_t>(r));
            a.val.push_back(1.0);
        } else {
            for (auto j = l.op.row_ptr[r]; j < l.op.row_ptr[r + 1]; ++j) {
                double v = -theta * dt * l.op.val[j];
                if (static_cast<std::size_t>(l.op.col[j]) == r) v += 1.0;
                a.col.push_back(l.op.col[j]);
                a.val.push_back(v);
            }
        }
        a.row_ptr.push_back(static_cast<std::int64_t>(a.col.size()));
    }
    implicit_ = std::move(a);

    if (theta < 1.0) {
        explicit_ = identity_plus(l.op, (1.0 - theta) * dt);
        has_explicit_ = true;
    }
    source_.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        source_[r] = spec.interior[r] ? dt * l.dirichlet_weight[r] * spec.dirichlet_value : 0.0;
    }
    rhs_.resize(n);
}

void ThetaStepper::advance(std::span<const double> in, std::span<double> out, double t) {
    const IbvpSpec& spec = *spec_;
    const std::size_t n = spec.grid.node_count();
    if (in.size() != n || out.size() != n) throw ShapeError("field size does not match grid");
    for (std::size_t r = 0; r < n; ++r) {
        if (!spec.interior[r] && in[r] != spec.dirichlet_value) {
            throw PreconditionError("input field violates Dirichlet data at node " +
                                    std::to_string(r));
        }
    }
    if (has_explicit_) {
        if (spec.march.backend == Backend::serial) kernels::serial::spmv(explicit_, in, rhs_);
        else kernels::omp::spmv(explicit_, in, rhs_);
        for (std::size_t r = 0; r < n; ++r) {
            rhs_[r] = spec.interior[r] ? rhs_[r] + source_[r] : spec.dirichlet_value;
        }
    } else {
        for (std::size_t r = 0; r < n; ++r) {
            rhs_[r] = spec.interior[r] ? in[r] + source_[r] : spec.dirichlet_value;
        }
    }
    std::copy(in.begin(), in.end(), out.begin());
    last_ = bicgstab(implicit_, rhs_, out, spec.march.tolerance.residual,
                     spec.march.tolerance.max_iterations, spec.march.backend);
    if (!last_.converged) {
        std::ostringstream os;
        os << "linear solve did not converge at t=" << t << ": residual " << last_.residual
           << " after " << last_.iterations << " iterations";
        throw SolverError(os.str(), last_.residual, last_.iterations);
    }
}

std::vector<double> step(const IbvpSpec& spec, std::span<const double> field_in, double t) {
    spec.validate();
    ThetaStepper stepper(spec, spec.march.dt);
    std::vector<double> out(field_in.size());
    stepper.advance(field_in, out, t);
    return out;
}

double FieldSeries::value_at(std::size_t snapshot, const Vec& x) const {
    return grid.interpolate(snapshots.at(snapshot), x);
}

namespace {

std::vector<double> mollified(const IbvpSpec& spec) {
    std::vector<double> f = spec.initial;
    const GridSpec& grid = spec.grid;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!spec.interior[i]) continue;
        const MultiIndex mi = grid.multi_index(i);
        bool touches = false;
        for (int a = 0; a < grid.dim() && !touches; ++a) {
            if (mi[a] > 0 && !spec.interior[i - grid.stride(a)]) touches = true;
            if (mi[a] + 1 < grid.axis(a).nodes() && !spec.interior[i + grid.stride(a)]) touches = true;
        }
        if (touches) f[i] = 0.5 * (spec.initial[i] + spec.dirichlet_value);
    }
    return f;
}

void track_range(Diagnostics& diag, std::span<const double> f) {
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    diag.min_value = std::min(diag.min_value, *lo);
    diag.max_value = std::max(diag.max_value, *hi);
}

}  // namespace

FieldSeries solve_ibvp(const IbvpSpec& spec) {
    spec.validate();
    FieldSeries series;
    series.grid = spec.grid;
    std::vector<double> field = spec.march.mollify ? mollified(spec) : spec.initial;

    Diagnostics& diag = series.diagnostics;
    diag.min_value = diag.max_value = field.empty() ? 0.0 : field.front();
    track_range(diag, field);
    series.times.push_back(0.0);
    series.snapshots.push_back(field);

    const double horizon = spec.march.horizon;
    if (horizon == 0.0) {
        diag.monotone_stencil = assemble_operator(spec).monotone;
        return series;
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(horizon / spec.march.dt - 1e-9)));
    const double dt = horizon / steps;
    diag.steps = steps;
    diag.dt = dt;

    ThetaStepper stepper(spec, dt);
    diag.monotone_stencil = stepper.monotone();
    std::vector<double> next(field.size());
    for (int s = 1; s <= steps; ++s) {
        const double t0 = (s - 1) * dt;
        stepper.advance(field, next, t0);
        field.swap(next);
        const KrylovResult& k = stepper.last_solve();
        diag.total_iterations += k.iterations;
        diag.max_iterations_per_step = std::max(diag.max_iterations_per_step, k.iterations);
        diag.max_residual = std::max(diag.max_residual, k.residual);
        track_range(diag, field);
        if (s % spec.march.snapshot_every == 0 || s == steps) {
            series.times.push_back(s == steps ? horizon : s * dt);
            series.snapshots.push_back(field);
        }
    }
    return series;
}

std::vector<double> snapshot_times(double horizon, double dt, int snapshot_every) {
    if (!(horizon >= 0.0) || !(dt > 0.0) || snapshot_every < 1) {
        throw PreconditionError("snapshot_times: invalid horizon, dt or cadence");
    }
    std::vector<double> times{0.0};
    if (horizon == 0.0) return times;
    const int steps = std::max(1, static_cast<int>(std::ceil(horizon / dt - 1e-9)));
    const double h = horizon / steps;
    for (int s = 1; s <= steps; ++s) {
        if (s % snapshot_every == 0 || s == steps) times.push_back(s == steps ? horizon : s * h);
    }
    return times;
}

IbvpSpec discretize(const IbvpProblem& problem, const GridSpec& grid, const MarchConfig& march) {
    if (problem.dim != grid.dim()) throw ShapeError("problem and grid dimensions differ");
    const int d = grid.dim();
    const auto dd = static_cast<std::size_t>(d * d);
    const std::size_t n = grid.node_count();

    IbvpSpec spec;
    spec.grid = grid;
    spec.march = march;
    spec.dirichlet_value = problem.dirichlet_value;
    spec.ghost_interior = problem.interior;
    spec.interior.assign(n, 0);
    spec.initial.assign(n, problem.dirichlet_value);
    spec.convection.assign(n * d, 0.0);
    spec.diffusion.assign(n * dd, 0.0);

    for_each_node(n, [&](std::size_t i) {
        const Vec x = grid.coord(i);
        const Mat s = problem.diffusion(x);
        if (s.rows() != d || s.cols() != d) throw ShapeError("diffusion tensor has wrong shape");
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) spec.diffusion[i * dd + a * d + b] = s(a, b);
        if (problem.interior(x)) {
            spec.interior[i] = 1;
            spec.initial[i] = problem.interior_initial;
            const Vec mu = problem.convection(x);
            if (mu.size() != d) throw ShapeError("convection field has wrong size");
            for (int a = 0; a < d; ++a) spec.convection[i * d + a] = mu[a];
        }
    });
    return spec;
}

double boundary_sensitivity(const IbvpProblem& problem, const GridSpec& grid,
                            const MarchConfig& march, std::span<const Vec> points) {
    const GridSpec coarse = grid.coarsened();
    MarchConfig m = march;
    m.snapshot_every = std::numeric_limits<int>::max();
    const FieldSeries base = solve_ibvp(discretize(problem, coarse, m));
    const FieldSeries wide = solve_ibvp(discretize(problem, coarse.doubled(), m));
    double worst = 0.0;
    for (const Vec& p : points) {
        const double a = base.value_at(base.snapshots.size() - 1, p);
        const double b = wide.value_at(wide.snapshots.size() - 1, p);
        worst = std::max(worst, std::abs(a - b));
    }
    return worst;
}

FieldSeries solve_problem(const IbvpProblem& problem, const GridSpec& grid,
                          const MarchConfig& march, const BoundaryProbe* probe) {
    FieldSeries series = solve_ibvp(discretize(problem, grid, march));
    if (probe && !probe->points.empty()) {
        const double s = boundary_sensitivity(problem, grid, march, probe->points);
        series.diagnostics.boundary_sensitivity = s;
        series.diagnostics.boundary_tolerance = probe->tolerance;
        series.diagnostics.boundary_flag = s > probe->tolerance;
    }
    return series;
}

}  // namespace safeprob
