#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lsi/errors.hpp"

namespace lsi {

// Uniform 1-D grid of m cell centers on [lo, hi].
struct GridAxis {
    double lo = -10.0;
    double hi = 10.0;
    int m = 16;

    double step() const { return (hi - lo) / m; }
    double center(int j) const { return lo + (j + 0.5) * step(); }
};

inline bool same_axis(const GridAxis& a, const GridAxis& b, double tol = 1e-12) {
    return a.m == b.m && std::abs(a.lo - b.lo) <= tol && std::abs(a.hi - b.hi) <= tol;
}

constexpr int kMaxGridDims = 3;
constexpr int kMaxGridPoints = 64;

// Discrete probability distribution on a product grid; weights are cell
// masses (not densities) in row-major order, last axis fastest.
struct GridDist {
    std::vector<GridAxis> axes;
    std::vector<double> w;

    int dim() const { return static_cast<int>(axes.size()); }

    std::int64_t size() const {
        std::int64_t s = 1;
        for (const auto& a : axes) s *= a.m;
        return s;
    }

    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes) v *= a.step();
        return v;
    }

    double total_mass() const {
        double s = 0.0;
        for (double x : w) s += x;
        return s;
    }

    void validate() const;
    void normalize();
};

inline void GridDist::validate() const {
    const int n = dim();
    if (n < 1 || n > kMaxGridDims)
        throw CapacityExceeded("grid dimension must be in [1, 3]");
    for (const auto& a : axes) {
        if (a.m < 2 || a.m > kMaxGridPoints)
            throw CapacityExceeded("grid points per axis must be in [2, 64]");
        if (!(a.hi > a.lo)) throw DimensionMismatch("grid axis has empty range");
    }
    if (static_cast<std::int64_t>(w.size()) != size())
        throw DimensionMismatch("grid weight count does not match axes");
    for (double x : w)
        if (!(x >= 0.0)) throw NotNormalizable("grid weights must be nonnegative");
    if (std::abs(total_mass() - 1.0) > 1e-12)
        throw NotNormalizable("grid weights must sum to 1 within 1e-12");
}

inline void GridDist::normalize() {
    double s = total_mass();
    if (!(s > 0.0)) throw NotNormalizable("grid has zero total mass");
    for (double& x : w) x /= s;
}

// Row-major strides for a dims vector, last axis fastest.
inline std::vector<std::int64_t> row_major_strides(const std::vector<int>& dims) {
    std::vector<std::int64_t> st(dims.size());
    std::int64_t s = 1;
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
        st[d] = s;
        s *= dims[d];
    }
    return st;
}

inline std::int64_t tensor_size(const std::vector<int>& dims) {
    std::int64_t s = 1;
    for (int d : dims) s *= d;
    return s;
}

inline void unravel(std::int64_t flat, const std::vector<int>& dims, int* idx) {
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(flat % dims[d]);
        flat /= dims[d];
    }
}

inline std::int64_t ravel(const int* idx, const std::vector<std::int64_t>& strides) {
    std::int64_t f = 0;
    for (std::size_t d = 0; d < strides.size(); ++d) f += idx[d] * strides[d];
    return f;
}

}  // namespace lsi
