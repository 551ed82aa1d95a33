#pragma once

#include <span>

#include "safeprob/linalg.hpp"

namespace safeprob {

class BarrierProblem;

inline constexpr double kFiniteDiffStep = 1e-5;

Vec fd_gradient(const ScalarField& fn, const Vec& x, double step = kFiniteDiffStep);
Mat fd_jacobian(const VectorField& fn, const Vec& x, double step = kFiniteDiffStep);
Mat fd_hessian(const ScalarField& fn, const Vec& x, double step = kFiniteDiffStep);

struct BarrierCheck {
    double max_gradient_error = 0.0;   // relative, against central differences
    double max_hessian_error = 0.0;    // relative, against differences of the gradient
    double max_hessian_asymmetry = 0.0;
    double min_gradient_norm_on_level = 0.0;  // over probes within `level_band` of the level
    int probes = 0;
    int level_probes = 0;
};

/// Consistency diagnostics for supplied barrier derivatives at probe states.
BarrierCheck check_barrier(const BarrierProblem& bar, std::span<const Vec> probes,
                           double level_band = 1e-2);

}  // namespace safeprob
