#pragma once

#include <string_view>

#include "safeprob/errors.hpp"
#include "safeprob/linalg.hpp"

namespace safeprob {

/// Control-affine Ito diffusion  dX = (f(X) + g(X) U) dt + sigma(X) dW.
///
/// The accessors check evaluator output shapes on every call; a mismatch is
/// a programming error in the supplied evaluator and raises ShapeError.
class ControlSystem {
public:
    ControlSystem(int dim_state, int dim_input, int dim_noise, VectorField drift,
                  MatrixField actuation, MatrixField noise);

    int dim_state() const noexcept { return n_; }
    int dim_input() const noexcept { return m_; }
    int dim_noise() const noexcept { return k_; }

    Vec drift(const Vec& x) const;
    Mat actuation(const Vec& x) const;
    Mat noise(const Vec& x) const;

    void require_state(const Vec& x) const;

private:
    int n_;
    int m_;
    int k_;
    VectorField f_;
    MatrixField g_;
    MatrixField sigma_;
};

/// Barrier function phi and the super-level threshold defining the safe set
/// {x : phi(x) >= level}.
class BarrierProblem {
public:
    BarrierProblem(int dim_state, ScalarField phi, VectorField gradient, MatrixField hessian,
                   double level = 0.0);

    /// Gradient and Hessian generated by central differences (step 1e-5).
    static BarrierProblem from_value(int dim_state, ScalarField phi, double level = 0.0);
    /// Hessian generated by central differences of the supplied gradient.
    static BarrierProblem from_gradient(int dim_state, ScalarField phi, VectorField gradient,
                                        double level = 0.0);

    int dim_state() const noexcept { return n_; }
    double level() const noexcept { return level_; }
    BarrierProblem with_level(double level) const;

    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;
    Mat hessian(const Vec& x) const;

private:
    int n_;
    ScalarField phi_;
    VectorField grad_;
    MatrixField hess_;
    double level_;
};

enum class FilterKind { none, zero_cbf, gradient };

std::string_view to_string(FilterKind kind);
FilterKind filter_kind_from_string(std::string_view name);

/// Feedback law K(x) built from a nominal controller and an optional safety
/// modification (zero-CBF filter or gradient push).
struct Policy {
    FilterKind kind = FilterKind::none;
    VectorField nominal;
    ScalarMap alpha;
    ScalarField gain;

    static Policy open_loop(VectorField nominal);
    static Policy zero_cbf(VectorField nominal, ScalarMap alpha);
    static Policy gradient_push(VectorField nominal, ScalarField gain);
};

/// alpha(s) = gamma * s
ScalarMap linear_rate(double gamma);
/// alpha(s) = gamma * s + offset. Not class-K when offset != 0.
ScalarMap affine_rate(double gamma, double offset);
/// alpha(s) = gamma * max(s, 0) + offset. With offset above the Ito term of
/// phi this keeps the zero-CBF filter feasible where L_g phi vanishes.
ScalarMap floored_rate(double gamma, double offset);

VectorField zero_input(int dim_input);

/// Lie derivative of phi along the actuation columns, as a row vector.
RowVec lie_g_phi(const ControlSystem& sys, const BarrierProblem& bar, const Vec& x);

/// Generator of phi along the closed loop with input u:
/// L_f phi + (L_g phi) u + 1/2 tr(sigma sigma^T Hess phi).
double d_phi(const ControlSystem& sys, const BarrierProblem& bar, const Vec& x, const Vec& u);

Vec closed_loop_control(const Policy& policy, const ControlSystem& sys, const BarrierProblem& bar,
                        const Vec& x);

/// True iff the filtered input satisfies D_phi >= -alpha(phi) - 1e-9.
/// Only defined for zero-CBF policies.
bool check_cbf_constraint(const Policy& policy, const ControlSystem& sys,
                          const BarrierProblem& bar, const Vec& x);

/// Closed-loop drift f(x) + g(x) K(x).
VectorField closed_loop_drift(const ControlSystem& sys, const BarrierProblem& bar,
                              const Policy& policy);

/// sigma(x) sigma(x)^T
MatrixField diffusion_tensor(const ControlSystem& sys);

/// Dynamics of Z = [phi(X); X].
struct AugmentedSystem {
    int dim = 0;
    VectorField rho;
    MatrixField zeta;
    MatrixField diffusion;
};

AugmentedSystem build_augmented(const ControlSystem& sys, const BarrierProblem& bar,
                                const Policy& policy);

/// z = [phi(x); x]
Vec augment_state(const BarrierProblem& bar, const Vec& x);

}  // namespace safeprob
