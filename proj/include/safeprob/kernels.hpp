#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace safeprob {

/// Compressed sparse row matrix. Row-major, column indices sorted per row.
struct CsrMatrix {
    std::size_t rows = 0;
    std::vector<std::int64_t> row_ptr{0};
    std::vector<std::int64_t> col;
    std::vector<double> val;

    std::size_t nnz() const noexcept { return val.size(); }
};

enum class Backend { serial, openmp };

namespace kernels {

// Reference implementations; the OpenMP versions below must agree with these
// bit-for-bit on spmv/axpby and to rounding on reductions.
namespace serial {
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double max_abs(std::span<const double> a);
// y = alpha * x + beta * y
void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y);
// out = b - A x
void residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b,
              std::span<double> out);
}  // namespace serial

namespace omp {
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
// Deterministic: fixed-size blocks reduced in index order, independent of the
// number of threads.
double dot(std::span<const double> a, std::span<const double> b);
double max_abs(std::span<const double> a);
void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y);
void residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b,
              std::span<double> out);
}  // namespace omp

int max_threads();

}  // namespace kernels

struct KrylovResult {
    int iterations = 0;
    double residual = 0.0;  // max-norm of b - A x on exit
    bool converged = false;
};

/// Jacobi-preconditioned BiCGSTAB. `x` holds the initial guess on entry.
KrylovResult bicgstab(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                      double tolerance, int max_iterations, Backend backend = Backend::openmp);

}  // namespace safeprob
