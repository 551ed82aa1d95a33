#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "safeprob/linalg.hpp"
#include "safeprob/system_model.hpp"

namespace testing {

using safeprob::Mat;
using safeprob::Vec;

inline Vec vec(std::initializer_list<double> v) {
    Vec x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x[i++] = e;
    return x;
}

inline Mat scalar_mat(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

// 1D dX = drift dt + vol dW with the input entering through gain g.
inline safeprob::ControlSystem line_system(double drift, double vol, double gain = 0.0) {
    return safeprob::ControlSystem(
        1, 1, 1, [drift](const Vec&) { return vec({drift}); },
        [gain](const Vec&) { return scalar_mat(gain); },
        [vol](const Vec&) { return scalar_mat(vol); });
}

inline safeprob::BarrierProblem identity_barrier(double level = 0.0) {
    return safeprob::BarrierProblem(
        1, [](const Vec& x) { return x[0]; }, [](const Vec&) { return vec({1.0}); },
        [](const Vec&) { return scalar_mat(0.0); }, level);
}

inline safeprob::BarrierProblem square_barrier() {
    return safeprob::BarrierProblem(
        1, [](const Vec& x) { return x[0] * x[0]; }, [](const Vec& x) { return vec({2.0 * x[0]}); },
        [](const Vec&) { return scalar_mat(2.0); }, 0.0);
}

// First-passage density of a Brownian motion with drift `toward` (positive
// moves toward the level) started at distance a > 0, integrated by Simpson's
// rule. Independent of the closed-form CDF used by the library.
inline double passage_by_quadrature(double a, double toward, double vol, double t, int panels = 20000) {
    if (t <= 0.0) return 0.0;
    auto density = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double z = a - toward * s;
        return a / (vol * std::sqrt(2.0 * std::numbers::pi * s * s * s)) *
               std::exp(-z * z / (2.0 * vol * vol * s));
    };
    const double h = t / panels;
    double sum = density(0.0) + density(t);
    for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * density(i * h);
    return sum * h / 3.0;
}

// P(first time phi = x hits `level` <= t) for phi = x0 + drift t + vol W.
inline double hit_probability(double x0, double drift, double vol, double level, double t) {
    const double a = std::abs(x0 - level);
    const double toward = x0 > level ? -drift : drift;
    return passage_by_quadrature(a, toward, vol, t);
}

// Root of hit_probability(t) - p on [lo, hi] by bisection.
inline double hit_quantile(double x0, double drift, double vol, double level, double p,
                           double lo, double hi) {
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (hit_probability(x0, drift, vol, level, mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Minimum-norm input satisfying a scalar affine constraint a + b u >= c,
// found by scanning u on a fine grid.
inline double scan_min_norm(double nominal, double a, double b, double c, double lo, double hi,
                            double step) {
    double best = std::nan("");
    double best_dist = INFINITY;
    for (double u = lo; u <= hi + 0.5 * step; u += step) {
        if (a + b * u < c - 1e-12) continue;
        const double d = std::abs(u - nominal);
        if (d < best_dist) {
            best_dist = d;
            best = u;
        }
    }
    return best;
}

// Eigenvalues of a symmetric 2x2 matrix, ascending.
inline std::pair<double, double> sym2_eigenvalues(double a, double b, double c) {
    const double mean = 0.5 * (a + c);
    const double r = std::hypot(0.5 * (a - c), b);
    return {mean - r, mean + r};
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("safeprob_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace testing
