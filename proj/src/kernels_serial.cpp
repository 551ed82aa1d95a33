#include <algorithm>
#include <cmath>

#include "safeprob/kernels.hpp"

namespace safeprob::kernels::serial {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        double sum = 0.0;
        for (auto j = a.row_ptr[r]; j < a.row_ptr[r + 1]; ++j) sum += a.val[j] * x[a.col[j]];
        y[r] = sum;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = alpha * x[i] + beta * y[i];
}

void residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b,
              std::span<double> out) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        double sum = 0.0;
        for (auto j = a.row_ptr[r]; j < a.row_ptr[r + 1]; ++j) sum += a.val[j] * x[a.col[j]];
        out[r] = b[r] - sum;
    }
}

}  // namespace safeprob::kernels::serial
