#include <cmath>
#include <vector>

#include "safeprob/kernels.hpp"

namespace safeprob {

namespace {

struct SerialOps {
    static void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
        kernels::serial::spmv(a, x, y);
    }
    static double dot(std::span<const double> a, std::span<const double> b) {
        return kernels::serial::dot(a, b);
    }
    static double max_abs(std::span<const double> a) { return kernels::serial::max_abs(a); }
    static void residual(const CsrMatrix& a, std::span<const double> x,
                         std::span<const double> b, std::span<double> out) {
        kernels::serial::residual(a, x, b, out);
    }
};

struct OmpOps {
    static void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
        kernels::omp::spmv(a, x, y);
    }
    static double dot(std::span<const double> a, std::span<const double> b) {
        return kernels::omp::dot(a, b);
    }
    static double max_abs(std::span<const double> a) { return kernels::omp::max_abs(a); }
    static void residual(const CsrMatrix& a, std::span<const double> x,
                         std::span<const double> b, std::span<double> out) {
        kernels::omp::residual(a, x, b, out);
    }
};

std::vector<double> inverse_diagonal(const CsrMatrix& a) {
    std::vector<double> inv(a.rows, 1.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (auto j = a.row_ptr[r]; j < a.row_ptr[r + 1]; ++j) {
            if (static_cast<std::size_t>(a.col[j]) == r && a.val[j] != 0.0) inv[r] = 1.0 / a.val[j];
        }
    }
    return inv;
}

template <class Ops>
KrylovResult solve(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                   double tolerance, int max_iterations) {
    const std::size_t n = a.rows;
    const std::vector<double> dinv = inverse_diagonal(a);
    std::vector<double> r(n), r_hat(n), p(n, 0.0), v(n, 0.0), s(n), t(n), y(n), z(n);

    KrylovResult out;
    Ops::residual(a, x, b, r);
    out.residual = Ops::max_abs(r);
    if (out.residual <= tolerance) {
        out.converged = true;
        return out;
    }
    r_hat = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;

    for (int it = 1; it <= max_iterations; ++it) {
        out.iterations = it;
        const double rho_new = Ops::dot(r_hat, r);
        if (rho_new == 0.0 || omega == 0.0) {
            // Breakdown: restart from the current residual.
            r_hat = r;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            rho = alpha = omega = 1.0;
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        for (std::size_t i = 0; i < n; ++i) y[i] = dinv[i] * p[i];
        Ops::spmv(a, y, v);
        const double denom = Ops::dot(r_hat, v);
        if (denom == 0.0) {
            r_hat = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        alpha = rho / denom;
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (Ops::max_abs(s) <= tolerance) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * y[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * s[i];
            Ops::spmv(a, z, t);
            const double tt = Ops::dot(t, t);
            omega = tt > 0.0 ? Ops::dot(t, s) / tt : 0.0;
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * y[i] + omega * z[i];
            for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
            if (Ops::max_abs(r) > tolerance) continue;
        }
        // Recurrence says converged; confirm on the true residual.
        Ops::residual(a, x, b, r);
        out.residual = Ops::max_abs(r);
        if (out.residual <= tolerance) {
            out.converged = true;
            return out;
        }
        r_hat = r;
        rho = alpha = omega = 1.0;
        std::fill(p.begin(), p.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
    }
    Ops::residual(a, x, b, r);
    out.residual = Ops::max_abs(r);
    out.converged = out.residual <= tolerance;
    return out;
}

}  // namespace

KrylovResult bicgstab(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                      double tolerance, int max_iterations, Backend backend) {
    return backend == Backend::serial ? solve<SerialOps>(a, b, x, tolerance, max_iterations)
                                      : solve<OmpOps>(a, b, x, tolerance, max_iterations);
}

}  // namespace safeprob
