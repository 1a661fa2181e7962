#include "lsi/gridops.hpp"

#include <cmath>
#include <limits>

#include "lsi/kernels.hpp"

namespace lsi {

std::vector<GridAxis> box_axes(int dim, double half_width, int points) {
    std::vector<GridAxis> axes(dim);
    for (auto& a : axes) {
        a.lo = -half_width;
        a.hi = half_width;
        a.m = points;
    }
    return axes;
}

std::vector<GridAxis> default_box_axes(const GaussianDist& g, int points) {
    double smax = 0.0;
    for (int i = 0; i < g.dim(); ++i) smax = std::max(smax, std::sqrt(g.cov(i, i)));
    return box_axes(g.dim(), 10.0 * smax, points);
}

Discretized discretize(const GaussianDist& g, const std::vector<GridAxis>& axes) {
    const int n = g.dim();
    if (static_cast<int>(axes.size()) != n)
        throw DimensionMismatch("discretize: axis count mismatch");

    std::vector<int> dims;
    for (const auto& a : axes) dims.push_back(a.m);
    const std::int64_t total = tensor_size(dims);

    Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("discretize: covariance not positive definite");

    std::vector<double> w(total);
    const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t c = 0; c < total; ++c) {
        int idx[kMaxGridDims];
        unravel(c, dims, idx);
        Eigen::VectorXd x(n);
        for (int d = 0; d < n; ++d) x(d) = axes[d].center(idx[d]);
        const Eigen::VectorXd dm = x - g.mean;
        w[c] = std::exp(-0.5 * dm.dot(llt.solve(dm)));
    }

    Discretized out;
    out.dist.axes = axes;
    out.dist.w = std::move(w);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const double norm_const = std::pow(2.0 * M_PI, 0.5 * n) * std::exp(0.5 * logdet);
    // density integral estimate before renormalization
    const double raw = out.dist.total_mass() * out.dist.cell_volume() / norm_const;
    out.clipped_mass = std::max(0.0, 1.0 - raw);
    out.dist.normalize();
    out.dist.validate();
    return out;
}

GridDist grid_gibbs(const PotentialSpec& spec, const std::vector<GridAxis>& axes) {
    if (static_cast<int>(axes.size()) != spec.n)
        throw DimensionMismatch("grid_gibbs: axis count mismatch");
    std::vector<int> dims;
    for (const auto& a : axes) dims.push_back(a.m);
    const std::int64_t total = tensor_size(dims);

    std::vector<double> logw(total);
    const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t c = 0; c < total; ++c) {
        int idx[kMaxGridDims];
        unravel(c, dims, idx);
        Eigen::VectorXd x(spec.n);
        for (int d = 0; d < spec.n; ++d) x(d) = axes[d].center(idx[d]);
        logw[c] = -potential_value(spec, x);
    }
    double mx = logw[0];
    for (double v : logw) mx = std::max(mx, v);

    GridDist out;
    out.axes = axes;
    out.w.resize(total);
    for (std::int64_t c = 0; c < total; ++c) out.w[c] = std::exp(logw[c] - mx);
    out.normalize();
    out.validate();
    return out;
}

std::vector<double> conditional_table(const PotentialSpec& spec,
                                      const std::vector<GridAxis>& axes, int site) {
    const int n = spec.n;
    if (static_cast<int>(axes.size()) != n)
        throw DimensionMismatch("conditional_table: axis count mismatch");
    std::vector<int> dims;
    for (const auto& a : axes) dims.push_back(a.m);
    const auto strides = row_major_strides(dims);
    const std::int64_t total = tensor_size(dims);
    const int m = dims[site];
    const std::int64_t step = strides[site];
    const std::int64_t cols = total / m;

    // column-independent part of the site log density
    const double mii = spec.precision(site, site);
    std::vector<double> qpart(m);
    for (int j = 0; j < m; ++j) {
        const double xi = axes[site].center(j);
        qpart[j] = -0.5 * mii * xi * xi;
        if (spec.has_perturbations()) qpart[j] -= spec.phi[site].value(xi);
    }

    std::vector<int> rdims;
    std::vector<std::int64_t> rstrides;
    std::vector<int> raxis;
    for (int d = 0; d < n; ++d)
        if (d != site) {
            rdims.push_back(dims[d]);
            rstrides.push_back(strides[d]);
            raxis.push_back(d);
        }

    std::vector<double> tab(total);
    const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t col = 0; col < cols; ++col) {
        std::int64_t base = 0;
        std::int64_t rest = col;
        double lin = 0.0;
        for (int d = static_cast<int>(rdims.size()) - 1; d >= 0; --d) {
            const int coord = static_cast<int>(rest % rdims[d]);
            rest /= rdims[d];
            base += coord * rstrides[d];
            lin += spec.precision(site, raxis[d]) * axes[raxis[d]].center(coord);
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j) {
            const double v = qpart[j] - lin * axes[site].center(j);
            tab[base + j * step] = v;
            mx = std::max(mx, v);
        }
        double z = 0.0;
        for (int j = 0; j < m; ++j) {
            double& v = tab[base + j * step];
            v = std::exp(v - mx);
            z += v;
        }
        for (int j = 0; j < m; ++j) tab[base + j * step] /= z;
    }
    return tab;
}

}  // namespace lsi
