#include "safeprob/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safeprob/system_model.hpp"

namespace safeprob {

Vec fd_gradient(const ScalarField& fn, const Vec& x, double step) {
    Vec g(x.size());
    Vec probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double up = fn(probe);
        probe[i] = x[i] - step;
        const double down = fn(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

Mat fd_jacobian(const VectorField& fn, const Vec& x, double step) {
    Vec probe = x;
    Mat j;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const Vec up = fn(probe);
        probe[i] = x[i] - step;
        const Vec down = fn(probe);
        probe[i] = x[i];
        if (i == 0) j.resize(up.size(), x.size());
        j.col(i) = (up - down) / (2.0 * step);
    }
    return j;
}

Mat fd_hessian(const ScalarField& fn, const Vec& x, double step) {
    const Eigen::Index n = x.size();
    Mat h(n, n);
    Vec p = x;
    const double f0 = fn(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        p[i] = x[i] + step;
        const double fp = fn(p);
        p[i] = x[i] - step;
        const double fm = fn(p);
        p[i] = x[i];
        h(i, i) = (fp - 2.0 * f0 + fm) / (step * step);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            auto eval = [&](double si, double sj) {
                p[i] = x[i] + si * step;
                p[j] = x[j] + sj * step;
                const double v = fn(p);
                p[i] = x[i];
                p[j] = x[j];
                return v;
            };
            const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) /
                             (4.0 * step * step);
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    return h;
}

BarrierCheck check_barrier(const BarrierProblem& bar, std::span<const Vec> probes,
                           double level_band) {
    BarrierCheck out;
    out.min_gradient_norm_on_level = std::numeric_limits<double>::infinity();
    const ScalarField phi = [&bar](const Vec& x) { return bar.value(x); };
    const VectorField grad = [&bar](const Vec& x) { return bar.gradient(x); };
    for (const Vec& x : probes) {
        const Vec g = bar.gradient(x);
        const Vec g_fd = fd_gradient(phi, x);
        const double gscale = std::max(1.0, g.cwiseAbs().maxCoeff());
        out.max_gradient_error =
            std::max(out.max_gradient_error, (g - g_fd).cwiseAbs().maxCoeff() / gscale);

        const Mat h = bar.hessian(x);
        const Mat h_fd = fd_jacobian(grad, x);
        const double hscale = std::max(1.0, h.cwiseAbs().maxCoeff());
        out.max_hessian_error =
            std::max(out.max_hessian_error, (h - h_fd).cwiseAbs().maxCoeff() / hscale);
        out.max_hessian_asymmetry = std::max(
            out.max_hessian_asymmetry, (h - h.transpose()).cwiseAbs().maxCoeff() / hscale);

        if (std::abs(bar.value(x) - bar.level()) <= level_band) {
            out.min_gradient_norm_on_level = std::min(out.min_gradient_norm_on_level, g.norm());
            ++out.level_probes;
        }
        ++out.probes;
    }
    if (out.level_probes == 0) out.min_gradient_norm_on_level = 0.0;
    return out;
}

}  // namespace safeprob
