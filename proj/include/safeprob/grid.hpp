#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "safeprob/linalg.hpp"

namespace safeprob {

inline constexpr int kMaxGridDim = 3;
inline constexpr int kMinCells = 8;
inline constexpr std::size_t kDefaultNodeCap = std::size_t{1} << 24;

struct Axis {
    double lower = 0.0;
    double upper = 1.0;
    int cells = kMinCells;

    int nodes() const noexcept { return cells + 1; }
    double spacing() const noexcept { return (upper - lower) / cells; }
    // Exact at both endpoints so that level sets passing through a bound are
    // classified consistently.
    double coord(int i) const noexcept {
        const double s = static_cast<double>(i) / cells;
        return lower * (1.0 - s) + upper * s;
    }
};

using MultiIndex = std::array<int, kMaxGridDim>;

/// Uniform tensor-product node grid, row-major (last axis fastest).
class GridSpec {
public:
    GridSpec() = default;
    explicit GridSpec(std::vector<Axis> axes, std::size_t node_cap = kDefaultNodeCap);

    int dim() const noexcept { return static_cast<int>(axes_.size()); }
    const std::vector<Axis>& axes() const noexcept { return axes_; }
    const Axis& axis(int a) const { return axes_.at(a); }
    std::size_t node_count() const noexcept { return count_; }
    std::size_t stride(int a) const noexcept { return strides_[a]; }

    std::size_t index(const MultiIndex& mi) const noexcept;
    MultiIndex multi_index(std::size_t idx) const noexcept;
    Vec coord(std::size_t idx) const;
    Vec coord(const MultiIndex& mi) const;

    bool contains(const Vec& x, double slack = 1e-12) const;
    /// Multilinear interpolation of a node field; x is clamped into the box.
    double interpolate(std::span<const double> field, const Vec& x) const;

    /// Same spacing, each axis extended by floor(cells/2) cells on both sides.
    GridSpec doubled() const;
    /// Half the cells per axis (at least kMinCells), same box.
    GridSpec coarsened() const;

    bool operator==(const GridSpec& other) const;

private:
    std::vector<Axis> axes_;
    std::array<std::size_t, kMaxGridDim> strides_{};
    std::size_t count_ = 0;
};

}  // namespace safeprob
