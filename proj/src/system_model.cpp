#include "safeprob/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "safeprob/finite_diff.hpp"

namespace safeprob {

std::string format_state(const Vec& x) {
    std::ostringstream os;
    os.precision(10);
    os << '[';
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (i) os << ", ";
        os << x[i];
    }
    os << ']';
    return os.str();
}

namespace {

void require_dim(int value, const char* name) {
    if (value < 1 || value > kMaxDim) {
        throw ShapeError(std::string(name) + " must lie in [1, " + std::to_string(kMaxDim) +
                         "], got " + std::to_string(value));
    }
}

void require_shape(const Mat& m, int rows, int cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << " returned " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
           << cols;
        throw ShapeError(os.str());
    }
}

void require_size(const Vec& v, int size, const char* what) {
    if (v.size() != size) {
        std::ostringstream os;
        os << what << " has size " << v.size() << ", expected " << size;
        throw ShapeError(os.str());
    }
}

}  // namespace

ControlSystem::ControlSystem(int dim_state, int dim_input, int dim_noise, VectorField drift,
                             MatrixField actuation, MatrixField noise)
    : n_(dim_state),
      m_(dim_input),
      k_(dim_noise),
      f_(std::move(drift)),
      g_(std::move(actuation)),
      sigma_(std::move(noise)) {
    require_dim(n_, "dim_state");
    require_dim(m_, "dim_input");
    require_dim(k_, "dim_noise");
    if (!f_ || !g_ || !sigma_) throw PreconditionError("control system evaluators must be set");
}

void ControlSystem::require_state(const Vec& x) const { require_size(x, n_, "state"); }

Vec ControlSystem::drift(const Vec& x) const {
    require_state(x);
    Vec out = f_(x);
    require_size(out, n_, "drift f(x)");
    return out;
}

Mat ControlSystem::actuation(const Vec& x) const {
    require_state(x);
    Mat out = g_(x);
    require_shape(out, n_, m_, "actuation g(x)");
    return out;
}

Mat ControlSystem::noise(const Vec& x) const {
    require_state(x);
    Mat out = sigma_(x);
    require_shape(out, n_, k_, "noise sigma(x)");
    return out;
}

BarrierProblem::BarrierProblem(int dim_state, ScalarField phi, VectorField gradient,
                               MatrixField hessian, double level)
    : n_(dim_state),
      phi_(std::move(phi)),
      grad_(std::move(gradient)),
      hess_(std::move(hessian)),
      level_(level) {
    require_dim(n_, "dim_state");
    if (!phi_ || !grad_ || !hess_) throw PreconditionError("barrier evaluators must be set");
}

BarrierProblem BarrierProblem::from_value(int dim_state, ScalarField phi, double level) {
    auto grad = [phi](const Vec& x) { return fd_gradient(phi, x); };
    return from_gradient(dim_state, phi, grad, level);
}

BarrierProblem BarrierProblem::from_gradient(int dim_state, ScalarField phi, VectorField gradient,
                                             double level) {
    auto hess = [gradient](const Vec& x) {
        Mat h = fd_jacobian(gradient, x);
        return Mat(0.5 * (h + h.transpose()));
    };
    return BarrierProblem(dim_state, std::move(phi), std::move(gradient), hess, level);
}

BarrierProblem BarrierProblem::with_level(double level) const {
    BarrierProblem copy = *this;
    copy.level_ = level;
    return copy;
}

double BarrierProblem::value(const Vec& x) const {
    require_size(x, n_, "state");
    return phi_(x);
}

Vec BarrierProblem::gradient(const Vec& x) const {
    require_size(x, n_, "state");
    Vec out = grad_(x);
    require_size(out, n_, "grad phi(x)");
    return out;
}

Mat BarrierProblem::hessian(const Vec& x) const {
    require_size(x, n_, "state");
    Mat out = hess_(x);
    require_shape(out, n_, n_, "hess phi(x)");
    return out;
}

std::string_view to_string(FilterKind kind) {
    switch (kind) {
    case FilterKind::none: return "none";
    case FilterKind::zero_cbf: return "zero_cbf";
    case FilterKind::gradient: return "gradient";
    }
    return "unknown";
}

FilterKind filter_kind_from_string(std::string_view name) {
    if (name == "none") return FilterKind::none;
    if (name == "zero_cbf") return FilterKind::zero_cbf;
    if (name == "gradient") return FilterKind::gradient;
    throw PreconditionError("unknown policy kind '" + std::string(name) + "'");
}

Policy Policy::open_loop(VectorField nominal) {
    Policy p;
    p.kind = FilterKind::none;
    p.nominal = std::move(nominal);
    return p;
}

Policy Policy::zero_cbf(VectorField nominal, ScalarMap alpha) {
    Policy p;
    p.kind = FilterKind::zero_cbf;
    p.nominal = std::move(nominal);
    p.alpha = std::move(alpha);
    return p;
}

Policy Policy::gradient_push(VectorField nominal, ScalarField gain) {
    Policy p;
    p.kind = FilterKind::gradient;
    p.nominal = std::move(nominal);
    p.gain = std::move(gain);
    return p;
}

ScalarMap linear_rate(double gamma) {
    return [gamma](double s) { return gamma * s; };
}

ScalarMap affine_rate(double gamma, double offset) {
    return [gamma, offset](double s) { return gamma * s + offset; };
}

ScalarMap floored_rate(double gamma, double offset) {
    return [gamma, offset](double s) { return gamma * std::max(s, 0.0) + offset; };
}

VectorField zero_input(int dim_input) {
    return [dim_input](const Vec&) { return Vec(Vec::Zero(dim_input)); };
}

RowVec lie_g_phi(const ControlSystem& sys, const BarrierProblem& bar, const Vec& x) {
    return bar.gradient(x).transpose() * sys.actuation(x);
}

double d_phi(const ControlSystem& sys, const BarrierProblem& bar, const Vec& x, const Vec& u) {
    if (bar.dim_state() != sys.dim_state()) {
        throw ShapeError("barrier and system state dimensions differ");
    }
    require_size(u, sys.dim_input(), "input");
    const Vec grad = bar.gradient(x);
    const Mat sigma = sys.noise(x);
    const double lf = grad.dot(sys.drift(x));
    const double lgu = grad.dot(sys.actuation(x) * u);
    const Mat ss = sigma * sigma.transpose();
    const double ito = 0.5 * (ss.cwiseProduct(bar.hessian(x))).sum();
    return lf + lgu + ito;
}

namespace {

Vec nominal_input(const Policy& policy, const ControlSystem& sys, const Vec& x) {
    if (!policy.nominal) return Vec::Zero(sys.dim_input());
    Vec u = policy.nominal(x);
    require_size(u, sys.dim_input(), "nominal N(x)");
    return u;
}

}  // namespace

Vec closed_loop_control(const Policy& policy, const ControlSystem& sys, const BarrierProblem& bar,
                        const Vec& x) {
    sys.require_state(x);
    Vec u = nominal_input(policy, sys, x);
    switch (policy.kind) {
    case FilterKind::none:
        return u;
    case FilterKind::gradient: {
        if (!policy.gain) throw PreconditionError("gradient policy requires a gain c(x)");
        const double c = policy.gain(x);
        if (!(c >= 0.0)) {
            throw PreconditionError("gradient policy gain must be non-negative, got " +
                                    std::to_string(c) + " at " + format_state(x));
        }
        return u + c * lie_g_phi(sys, bar, x).transpose();
    }
    case FilterKind::zero_cbf: {
        if (!policy.alpha) throw PreconditionError("zero-CBF policy requires alpha");
        const double bound = -policy.alpha(bar.value(x));
        const double nominal_rate = d_phi(sys, bar, x, u);
        if (nominal_rate >= bound) return u;
        const RowVec lg = lie_g_phi(sys, bar, x);
        const double lg_sq = lg.squaredNorm();
        if (lg_sq == 0.0) {
            throw InfeasibleError("zero-CBF constraint infeasible (L_g phi = 0) at " + format_state(x),
                                  x);
        }
        // Closest input to N(x) on the half-space D_phi(x, u) >= -alpha(phi(x)).
        const double lambda = (bound - nominal_rate) / lg_sq;
        return u + lambda * lg.transpose();
    }
    }
    return u;
}

bool check_cbf_constraint(const Policy& policy, const ControlSystem& sys, const BarrierProblem& bar,
                          const Vec& x) {
    if (policy.kind != FilterKind::zero_cbf) {
        throw PreconditionError("check_cbf_constraint requires a zero-CBF policy");
    }
    const Vec u = closed_loop_control(policy, sys, bar, x);
    return d_phi(sys, bar, x, u) >= -policy.alpha(bar.value(x)) - 1e-9;
}

VectorField closed_loop_drift(const ControlSystem& sys, const BarrierProblem& bar,
                              const Policy& policy) {
    return [sys, bar, policy](const Vec& x) {
        const Vec u = closed_loop_control(policy, sys, bar, x);
        return Vec(sys.drift(x) + sys.actuation(x) * u);
    };
}

MatrixField diffusion_tensor(const ControlSystem& sys) {
    return [sys](const Vec& x) {
        const Mat s = sys.noise(x);
        return Mat(s * s.transpose());
    };
}

Vec augment_state(const BarrierProblem& bar, const Vec& x) {
    Vec z(x.size() + 1);
    z[0] = bar.value(x);
    z.tail(x.size()) = x;
    return z;
}

AugmentedSystem build_augmented(const ControlSystem& sys, const BarrierProblem& bar,
                                const Policy& policy) {
    if (bar.dim_state() != sys.dim_state()) {
        throw ShapeError("barrier and system state dimensions differ");
    }
    if (sys.dim_state() + 1 > kMaxDim) {
        throw ShapeError("augmented dimension exceeds supported maximum");
    }
    AugmentedSystem aug;
    aug.dim = sys.dim_state() + 1;
    aug.rho = [sys, bar, policy](const Vec& x) {
        const Vec u = closed_loop_control(policy, sys, bar, x);
        Vec r(x.size() + 1);
        r[0] = d_phi(sys, bar, x, u);
        r.tail(x.size()) = sys.drift(x) + sys.actuation(x) * u;
        return r;
    };
    aug.zeta = [sys, bar](const Vec& x) {
        const Mat s = sys.noise(x);
        Mat z(x.size() + 1, s.cols());
        z.row(0) = bar.gradient(x).transpose() * s;
        z.bottomRows(x.size()) = s;
        return z;
    };
    aug.diffusion = [zeta = aug.zeta](const Vec& x) {
        const Mat z = zeta(x);
        return Mat(z * z.transpose());
    };
    return aug;
}

}  // namespace safeprob
