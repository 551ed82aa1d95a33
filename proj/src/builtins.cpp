#include "safeprob/builtins.hpp"

#include <cmath>
#include <numbers>

#include "safeprob/errors.hpp"

namespace safeprob {

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Mat constant_matrix(int rows, int cols, std::initializer_list<double> row_major) {
    Mat m(rows, cols);
    auto it = row_major.begin();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = *it++;
    return m;
}

// phi(x) = 1 - x0^2 - x1^2 on the first two coordinates of an n-state.
BarrierProblem unit_disk_barrier(int n) {
    auto phi = [](const Vec& x) { return 1.0 - x[0] * x[0] - x[1] * x[1]; };
    auto grad = [n](const Vec& x) {
        Vec g = Vec::Zero(n);
        g[0] = -2.0 * x[0];
        g[1] = -2.0 * x[1];
        return g;
    };
    auto hess = [n](const Vec&) {
        Mat h = Mat::Zero(n, n);
        h(0, 0) = -2.0;
        h(1, 1) = -2.0;
        return h;
    };
    return BarrierProblem(n, phi, grad, hess, 0.0);
}

Example double_integrator() {
    // x = (position, velocity); force input; noise on the velocity channel.
    constexpr double noise = 0.5;
    ControlSystem sys(
        2, 1, 1, [](const Vec& x) { return vec({x[1], 0.0}); },
        [](const Vec&) { return constant_matrix(2, 1, {0.0, 1.0}); },
        [](const Vec&) { return constant_matrix(2, 1, {0.0, noise}); });
    // Nominal controller tracks position 2, outside the unit disk.
    auto nominal = [](const Vec& x) { return vec({2.0 * (2.0 - x[0]) - x[1]}); };
    // At v = 0 the input has no authority over phi and D_phi = -noise^2, so
    // the rate floor must exceed noise^2 for the filter to stay feasible.
    Policy policy = Policy::zero_cbf(nominal, floored_rate(2.0, 0.3));

    QuerySpec q;
    q.level = 0.0;
    q.horizon = 2.0;
    q.states = {vec({0.0, 0.0})};
    q.numerics.grid = GridSpec({{-1.05, 1.05, 210}, {-1.05, 1.05, 210}});
    q.numerics.dt = 2e-3;
    q.numerics.snapshot_every = 10;

    PathConfig mc;
    mc.dt = 1e-3;
    mc.horizon = q.horizon;
    mc.n_paths = 100000;
    mc.seed = 20240601;
    return Example{"double_integrator", sys, unit_disk_barrier(2), policy, q, mc, std::nullopt};
}

Example unicycle_disk() {
    // x = (px, py, heading); inputs (speed adjustment, turn rate).
    constexpr double cruise = 0.5;
    constexpr double pos_noise = 0.2;
    constexpr double heading_noise = 0.3;
    ControlSystem sys(
        3, 2, 3,
        [](const Vec& x) { return vec({cruise * std::cos(x[2]), cruise * std::sin(x[2]), 0.0}); },
        [](const Vec& x) {
            return constant_matrix(3, 2, {std::cos(x[2]), 0.0, std::sin(x[2]), 0.0, 0.0, 1.0});
        },
        [](const Vec&) {
            return constant_matrix(3, 3,
                                   {pos_noise, 0.0, 0.0, 0.0, pos_noise, 0.0, 0.0, 0.0, heading_noise});
        });
    auto nominal = [](const Vec&) { return vec({0.0, 0.5}); };
    Policy policy = Policy::zero_cbf(nominal, floored_rate(1.0, 0.1));

    QuerySpec q;
    q.level = 0.0;
    q.horizon = 2.0;
    q.states = {vec({0.0, 0.0, 0.0})};
    q.numerics.grid = GridSpec({{-1.1, 1.1, 64}, {-1.1, 1.1, 64}, {-std::numbers::pi, std::numbers::pi, 32}});
    q.numerics.dt = 1e-2;
    q.numerics.snapshot_every = 5;

    PathConfig mc;
    mc.dt = 1e-3;
    mc.horizon = q.horizon;
    mc.n_paths = 20000;
    mc.seed = 7;
    return Example{"unicycle_disk", sys, unit_disk_barrier(3), policy, q, mc, std::nullopt};
}

}  // namespace

Example drifted_bm_1d(double drift, double vol) {
    ControlSystem sys(
        1, 1, 1, [drift](const Vec&) { return vec({drift}); },
        [](const Vec&) { return constant_matrix(1, 1, {0.0}); },
        [vol](const Vec&) { return constant_matrix(1, 1, {vol}); });
    BarrierProblem bar(
        1, [](const Vec& x) { return x[0]; }, [](const Vec&) { return vec({1.0}); },
        [](const Vec&) { return constant_matrix(1, 1, {0.0}); }, 0.0);

    QuerySpec q;
    q.level = 0.0;
    q.horizon = 1.0;
    q.states = {vec({1.0}), vec({-1.0})};
    q.numerics.grid = GridSpec({{-8.0, 8.0, 1600}});
    q.numerics.dt = 1e-3;
    q.numerics.snapshot_every = 10;

    // Discrete monitoring misses crossings between steps; the bias scales
    // like sqrt(dt): about 2e-3 for exits and 4e-3 for entries at this step.
    PathConfig mc;
    mc.dt = 2e-4;
    mc.horizon = q.horizon;
    mc.n_paths = 100000;
    mc.seed = 1;
    return Example{"drifted_bm_1d", sys, bar, Policy::open_loop(zero_input(1)), q, mc,
                   Example::Analytic{drift, vol}};
}

std::vector<std::string> example_names() {
    return {"drifted_bm_1d", "double_integrator", "unicycle_disk"};
}

Example make_example(std::string_view name) {
    if (name == "drifted_bm_1d") return drifted_bm_1d();
    if (name == "double_integrator") return double_integrator();
    if (name == "unicycle_disk") return unicycle_disk();
    throw PreconditionError("unknown builtin example '" + std::string(name) + "'");
}

}  // namespace safeprob
