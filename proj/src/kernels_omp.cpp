#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "safeprob/kernels.hpp"

namespace safeprob::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace omp {

namespace {
constexpr std::int64_t kBlock = 4096;
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
    const auto rows = static_cast<std::int64_t>(a.rows);
    const auto* rp = a.row_ptr.data();
    const auto* ci = a.col.data();
    const double* v = a.val.data();
    const double* xp = x.data();
    double* yp = y.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (auto j = rp[r]; j < rp[r + 1]; ++j) sum += v[j] * xp[ci[j]];
        yp[r] = sum;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<std::int64_t>(a.size());
    const std::int64_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
    const double* ap = a.data();
    const double* bp = b.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t blk = 0; blk < blocks; ++blk) {
        const std::int64_t lo = blk * kBlock;
        const std::int64_t hi = std::min(n, lo + kBlock);
        double sum = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) sum += ap[i] * bp[i];
        partial[static_cast<std::size_t>(blk)] = sum;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double max_abs(std::span<const double> a) {
    const auto n = static_cast<std::int64_t>(a.size());
    const double* ap = a.data();
    double m = 0.0;
#pragma omp parallel for reduction(max : m) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) m = std::max(m, std::abs(ap[i]));
    return m;
}

void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) {
    const auto n = static_cast<std::int64_t>(y.size());
    const double* xp = x.data();
    double* yp = y.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) yp[i] = alpha * xp[i] + beta * yp[i];
}

void residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b,
              std::span<double> out) {
    const auto rows = static_cast<std::int64_t>(a.rows);
    const auto* rp = a.row_ptr.data();
    const auto* ci = a.col.data();
    const double* v = a.val.data();
    const double* xp = x.data();
    const double* bp = b.data();
    double* op = out.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (auto j = rp[r]; j < rp[r + 1]; ++j) sum += v[j] * xp[ci[j]];
        op[r] = bp[r] - sum;
    }
}

}  // namespace omp
}  // namespace safeprob::kernels
