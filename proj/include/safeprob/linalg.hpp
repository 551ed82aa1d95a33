#pragma once

#include <functional>

#include <Eigen/Dense>

namespace safeprob {

// Upper bound on state/input/noise dimensions. Small fixed capacity keeps
// every per-state vector and matrix on the stack in the hot loops.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;
using ScalarMap = std::function<double(double)>;
using StatePredicate = std::function<bool(const Vec&)>;

}  // namespace safeprob
