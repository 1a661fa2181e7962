#include "lsi/kernels.hpp"

#include <climits>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace lsi::kernels {

namespace {

int g_threads = -1;

int env_threads() {
    const char* s = std::getenv("LSI_CERTIFY_THREADS");
    if (!s) return 1;
    const int t = std::atoi(s);
    return t > 1 ? t : 1;
}

// Iteration over the axis-i columns of a row-major tensor.
struct ColumnIter {
    std::int64_t count = 1;  // number of columns
    std::int64_t step = 1;   // stride along the column axis
    int m = 1;               // column length
    std::vector<int> rdims;  // remaining dims
    std::vector<std::int64_t> rstrides;

    ColumnIter(const std::vector<int>& dims, int axis) {
        const auto strides = row_major_strides(dims);
        step = strides[axis];
        m = dims[axis];
        for (std::size_t d = 0; d < dims.size(); ++d) {
            if (static_cast<int>(d) == axis) continue;
            rdims.push_back(dims[d]);
            rstrides.push_back(strides[d]);
            count *= dims[d];
        }
    }

    std::int64_t base(std::int64_t col) const {
        std::int64_t b = 0;
        for (int d = static_cast<int>(rdims.size()) - 1; d >= 0; --d) {
            b += (col % rdims[d]) * rstrides[d];
            col /= rdims[d];
        }
        return b;
    }
};

double kl_term(double p, double q, bool& infinite) {
    if (p <= 0.0) return 0.0;
    if (q <= 0.0) {
        infinite = true;
        return 0.0;
    }
    return p * std::log(p / q);
}

// Squared gradient of log(p/q) at one cell; neighbors with empty p or q
// fall back to one-sided differences, isolated cells contribute zero.
double grad_sq_at(const GridDist& p, const std::vector<double>& logr,
                  const std::vector<int>& dims, const std::vector<std::int64_t>& strides,
                  std::int64_t c, const int* idx) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const double h = p.axes[d].step();
        const std::int64_t s = strides[d];
        const bool has_lo = idx[d] > 0 && std::isfinite(logr[c - s]);
        const bool has_hi = idx[d] + 1 < dims[d] && std::isfinite(logr[c + s]);
        double g = 0.0;
        if (has_lo && has_hi)
            g = (logr[c + s] - logr[c - s]) / (2.0 * h);
        else if (has_hi)
            g = (logr[c + s] - logr[c]) / h;
        else if (has_lo)
            g = (logr[c] - logr[c - s]) / h;
        acc += g * g;
    }
    return acc;
}

SumResult fisher_impl(const GridDist& p, const GridDist& q, bool parallel) {
    const std::int64_t total = p.size();
    std::vector<int> dims;
    for (const auto& a : p.axes) dims.push_back(a.m);
    const auto strides = row_major_strides(dims);

    std::vector<double> logr(total);
    bool infinite = false;
    const int nt = parallel ? threads() : 1;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t c = 0; c < total; ++c) {
        if (p.w[c] > 0.0 && q.w[c] > 0.0)
            logr[c] = std::log(p.w[c]) - std::log(q.w[c]);
        else
            logr[c] = std::numeric_limits<double>::quiet_NaN();
    }

    double acc = 0.0;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1) reduction(+ : acc) reduction(|| : infinite)
    for (std::int64_t c = 0; c < total; ++c) {
        if (p.w[c] <= 0.0) continue;
        if (q.w[c] <= 0.0) {
            infinite = true;
            continue;
        }
        int idx[kMaxGridDims];
        unravel(c, dims, idx);
        acc += p.w[c] * grad_sq_at(p, logr, dims, strides, c, idx);
    }
    return {acc, infinite};
}

void sweep_impl(std::vector<double>& w, const std::vector<int>& dims, int axis,
                const std::vector<double>& qtab, bool parallel) {
    const ColumnIter it(dims, axis);
    const int nt = parallel ? threads() : 1;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t col = 0; col < it.count; ++col) {
        const std::int64_t b = it.base(col);
        double mass = 0.0;
        for (int j = 0; j < it.m; ++j) mass += w[b + j * it.step];
        for (int j = 0; j < it.m; ++j) w[b + j * it.step] = mass * qtab[b + j * it.step];
    }
}

double column_kl_impl(const std::vector<double>& joint, const std::vector<int>& dims,
                      int axis, const std::vector<double>& qtab, bool parallel) {
    const ColumnIter it(dims, axis);
    const int nt = parallel ? threads() : 1;
    double acc = 0.0;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1) reduction(+ : acc)
    for (std::int64_t col = 0; col < it.count; ++col) {
        const std::int64_t b = it.base(col);
        double mass = 0.0;
        for (int j = 0; j < it.m; ++j) mass += joint[b + j * it.step];
        if (mass < 1e-14) continue;
        double d = 0.0;
        for (int j = 0; j < it.m; ++j) {
            const double pj = joint[b + j * it.step] / mass;
            if (pj > 0.0) d += pj * std::log(pj / qtab[b + j * it.step]);
        }
        acc += mass * d;
    }
    return acc;
}

std::vector<double> marginalize_impl(const std::vector<double>& w,
                                     const std::vector<int>& dims,
                                     const std::vector<bool>& keep, bool parallel) {
    std::vector<int> kdims, ddims;
    std::vector<std::int64_t> kstrides, dstrides;
    const auto strides = row_major_strides(dims);
    for (std::size_t d = 0; d < dims.size(); ++d) {
        if (keep[d]) {
            kdims.push_back(dims[d]);
            kstrides.push_back(strides[d]);
        } else {
            ddims.push_back(dims[d]);
            dstrides.push_back(strides[d]);
        }
    }
    const std::int64_t nout = tensor_size(kdims);
    const std::int64_t nd = tensor_size(ddims);
    std::vector<double> out(nout, 0.0);
    const int nt = parallel ? threads() : 1;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t o = 0; o < nout; ++o) {
        std::int64_t base = 0;
        std::int64_t rest = o;
        for (int d = static_cast<int>(kdims.size()) - 1; d >= 0; --d) {
            base += (rest % kdims[d]) * kstrides[d];
            rest /= kdims[d];
        }
        double acc = 0.0;
        for (std::int64_t f = 0; f < nd; ++f) {
            std::int64_t off = 0;
            std::int64_t r = f;
            for (int d = static_cast<int>(ddims.size()) - 1; d >= 0; --d) {
                off += (r % ddims[d]) * dstrides[d];
                r /= ddims[d];
            }
            acc += w[base + off];
        }
        out[o] = acc;
    }
    return out;
}

}  // namespace

int threads() {
    if (g_threads < 1) g_threads = env_threads();
    return g_threads;
}

void set_threads(int t) { g_threads = t > 1 ? t : 1; }

SumResult kl_cells(const std::vector<double>& p, const std::vector<double>& q) {
    const std::int64_t total = static_cast<std::int64_t>(p.size());
    double acc = 0.0;
    bool infinite = false;
    const int nt = threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1) reduction(+ : acc) reduction(|| : infinite)
    for (std::int64_t c = 0; c < total; ++c) acc += kl_term(p[c], q[c], infinite);
    return {acc, infinite};
}

SumResult kl_cells_serial(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    bool infinite = false;
    for (std::size_t c = 0; c < p.size(); ++c) acc += kl_term(p[c], q[c], infinite);
    return {acc, infinite};
}

SumResult fisher_cells(const GridDist& p, const GridDist& q) { return fisher_impl(p, q, true); }

SumResult fisher_cells_serial(const GridDist& p, const GridDist& q) {
    return fisher_impl(p, q, false);
}

void sweep_site(std::vector<double>& w, const std::vector<int>& dims, int axis,
                const std::vector<double>& qtab) {
    sweep_impl(w, dims, axis, qtab, true);
}

void sweep_site_serial(std::vector<double>& w, const std::vector<int>& dims, int axis,
                       const std::vector<double>& qtab) {
    sweep_impl(w, dims, axis, qtab, false);
}

double column_kl(const std::vector<double>& joint, const std::vector<int>& dims, int axis,
                 const std::vector<double>& qtab) {
    return column_kl_impl(joint, dims, axis, qtab, true);
}

double column_kl_serial(const std::vector<double>& joint, const std::vector<int>& dims,
                        int axis, const std::vector<double>& qtab) {
    return column_kl_impl(joint, dims, axis, qtab, false);
}

std::vector<double> marginalize(const std::vector<double>& w, const std::vector<int>& dims,
                                const std::vector<bool>& keep) {
    return marginalize_impl(w, dims, keep, true);
}

std::vector<double> marginalize_serial(const std::vector<double>& w,
                                       const std::vector<int>& dims,
                                       const std::vector<bool>& keep) {
    return marginalize_impl(w, dims, keep, false);
}

}  // namespace lsi::kernels
