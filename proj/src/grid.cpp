#include "safeprob/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "safeprob/errors.hpp"

namespace safeprob {

GridSpec::GridSpec(std::vector<Axis> axes, std::size_t node_cap) : axes_(std::move(axes)) {
    if (axes_.empty() || dim() > kMaxGridDim) {
        throw ShapeError("grid dimension must be 1.." + std::to_string(kMaxGridDim) + ", got " +
                         std::to_string(axes_.size()));
    }
    for (const Axis& ax : axes_) {
        if (!(ax.lower < ax.upper)) throw ShapeError("grid axis requires lower < upper");
        if (ax.cells < kMinCells) {
            throw ShapeError("grid axis needs at least " + std::to_string(kMinCells) + " cells");
        }
    }
    std::size_t s = 1;
    for (int a = dim() - 1; a >= 0; --a) {
        strides_[a] = s;
        s *= static_cast<std::size_t>(axes_[a].nodes());
        if (s > node_cap) {
            throw ShapeError("grid exceeds node cap of " + std::to_string(node_cap));
        }
    }
    count_ = s;
}

std::size_t GridSpec::index(const MultiIndex& mi) const noexcept {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx += static_cast<std::size_t>(mi[a]) * strides_[a];
    return idx;
}

MultiIndex GridSpec::multi_index(std::size_t idx) const noexcept {
    MultiIndex mi{};
    for (int a = 0; a < dim(); ++a) {
        mi[a] = static_cast<int>(idx / strides_[a]);
        idx %= strides_[a];
    }
    return mi;
}

Vec GridSpec::coord(const MultiIndex& mi) const {
    Vec x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = axes_[a].coord(mi[a]);
    return x;
}

Vec GridSpec::coord(std::size_t idx) const { return coord(multi_index(idx)); }

bool GridSpec::contains(const Vec& x, double slack) const {
    if (x.size() != dim()) return false;
    for (int a = 0; a < dim(); ++a) {
        const double pad = slack * (axes_[a].upper - axes_[a].lower);
        if (x[a] < axes_[a].lower - pad || x[a] > axes_[a].upper + pad) return false;
    }
    return true;
}

double GridSpec::interpolate(std::span<const double> field, const Vec& x) const {
    if (x.size() != dim()) throw ShapeError("interpolation point has wrong dimension");
    if (field.size() != count_) throw ShapeError("field size does not match grid");
    MultiIndex base{};
    std::array<double, kMaxGridDim> frac{};
    for (int a = 0; a < dim(); ++a) {
        const Axis& ax = axes_[a];
        const double t = std::clamp((x[a] - ax.lower) / ax.spacing(), 0.0, double(ax.cells));
        int i = std::min(static_cast<int>(std::floor(t)), ax.cells - 1);
        frac[a] = t - i;
        // Snap to the node when the point sits on it, so node values are returned exactly.
        if (std::abs(frac[a]) < 1e-12) frac[a] = 0.0;
        if (std::abs(frac[a] - 1.0) < 1e-12) frac[a] = 1.0;
        base[a] = i;
    }
    double value = 0.0;
    const int corners = 1 << dim();
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        MultiIndex mi = base;
        for (int a = 0; a < dim(); ++a) {
            const bool up = (c >> a) & 1;
            w *= up ? frac[a] : 1.0 - frac[a];
            mi[a] += up;
        }
        if (w != 0.0) value += w * field[index(mi)];
    }
    return value;
}

GridSpec GridSpec::doubled() const {
    std::vector<Axis> out = axes_;
    for (Axis& ax : out) {
        const int pad = ax.cells / 2;
        const double h = ax.spacing();
        ax.lower -= pad * h;
        ax.upper += pad * h;
        ax.cells += 2 * pad;
    }
    return GridSpec(out, std::numeric_limits<std::size_t>::max());
}

GridSpec GridSpec::coarsened() const {
    std::vector<Axis> out = axes_;
    for (Axis& ax : out) ax.cells = std::max(kMinCells, ax.cells / 2);
    return GridSpec(out, std::numeric_limits<std::size_t>::max());
}

bool GridSpec::operator==(const GridSpec& other) const {
    if (dim() != other.dim()) return false;
    for (int a = 0; a < dim(); ++a) {
        const Axis& l = axes_[a];
        const Axis& r = other.axes_[a];
        if (l.lower != r.lower || l.upper != r.upper || l.cells != r.cells) return false;
    }
    return true;
}

}  // namespace safeprob
