#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "safeprob/kernels.hpp"

using namespace safeprob;

namespace {

// Nonsymmetric diagonally dominant band matrix (an upwinded 1D operator).
CsrMatrix band_matrix(std::size_t n, double shift) {
    CsrMatrix m;
    m.rows = n;
    for (std::size_t r = 0; r < n; ++r) {
        if (r > 0) {
            m.col.push_back(static_cast<std::int64_t>(r - 1));
            m.val.push_back(-1.3);
        }
        m.col.push_back(static_cast<std::int64_t>(r));
        m.val.push_back(2.0 + shift + 0.01 * static_cast<double>(r % 7));
        if (r + 1 < n) {
            m.col.push_back(static_cast<std::int64_t>(r + 1));
            m.val.push_back(-0.7);
        }
        m.row_ptr.push_back(static_cast<std::int64_t>(m.col.size()));
    }
    return m;
}

std::vector<double> random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& e : v) e = u(gen);
    return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("parallel spmv and axpby match the serial reference bit for bit") {
    const std::size_t n = 50000;
    const CsrMatrix a = band_matrix(n, 0.1);
    const auto x = random_vector(n, 1);
    std::vector<double> ys(n), yp(n);
    kernels::serial::spmv(a, x, ys);
    kernels::omp::spmv(a, x, yp);
    CHECK(same_bits(ys, yp));

    auto s = random_vector(n, 2), p = s;
    kernels::serial::axpby(0.3, x, -1.7, s);
    kernels::omp::axpby(0.3, x, -1.7, p);
    CHECK(same_bits(s, p));

    const auto b = random_vector(n, 3);
    std::vector<double> rs(n), rp(n);
    kernels::serial::residual(a, x, b, rs);
    kernels::omp::residual(a, x, b, rp);
    CHECK(same_bits(rs, rp));
    CHECK(kernels::serial::max_abs(rs) == kernels::omp::max_abs(rp));
}

TEST_CASE("parallel dot agrees with the reference and ignores the thread count") {
    const std::size_t n = 100003;
    const auto a = random_vector(n, 4), b = random_vector(n, 5);
    const double ref = kernels::serial::dot(a, b);
    const double par = kernels::omp::dot(a, b);
    CHECK(par == doctest::Approx(ref).epsilon(1e-12));
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const double one = kernels::omp::dot(a, b);
    omp_set_num_threads(3);
    const double three = kernels::omp::dot(a, b);
    omp_set_num_threads(saved);
    CHECK(std::memcmp(&one, &three, sizeof one) == 0);
    CHECK(std::memcmp(&one, &par, sizeof one) == 0);
#endif
}

TEST_CASE("BiCGSTAB matches a dense direct solve") {
    const std::size_t n = 200;
    const CsrMatrix a = band_matrix(n, 0.05);
    const auto b = random_vector(n, 6);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (auto j = a.row_ptr[r]; j < a.row_ptr[r + 1]; ++j) dense(r, a.col[j]) = a.val[j];
    }
    const Eigen::VectorXd direct = dense.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
    for (Backend backend : {Backend::serial, Backend::openmp}) {
        std::vector<double> x(n, 0.0);
        const KrylovResult r = bicgstab(a, b, x, 1e-12, 1000, backend);
        CHECK(r.converged);
        CHECK(r.residual <= 1e-12);
        for (std::size_t i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(direct[i]).epsilon(1e-9));
    }
}

TEST_CASE("BiCGSTAB reports non-convergence") {
    const CsrMatrix a = band_matrix(5000, 0.0);
    const auto b = random_vector(5000, 7);
    std::vector<double> x(5000, 0.0);
    const KrylovResult r = bicgstab(a, b, x, 1e-14, 1);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(r.residual > 1e-14);
}

TEST_CASE("BiCGSTAB returns immediately on an exact initial guess") {
    const CsrMatrix a = band_matrix(100, 0.0);
    const auto x0 = random_vector(100, 8);
    std::vector<double> b(100);
    kernels::serial::spmv(a, x0, b);
    auto x = x0;
    const KrylovResult r = bicgstab(a, b, x, 1e-10, 100);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(same_bits(x, x0));
}

}
