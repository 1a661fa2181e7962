#include "lsi/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lsi/kernels.hpp"
#include "lsi/transport.hpp"

namespace lsi {

namespace {

void check_same_axes(const GridDist& p, const GridDist& q, const char* what) {
    if (p.dim() != q.dim()) throw DimensionMismatch(std::string(what) + ": dimension mismatch");
    for (int d = 0; d < p.dim(); ++d)
        if (!same_axis(p.axes[d], q.axes[d]))
            throw DimensionMismatch(std::string(what) + ": grids must share axes");
}

DiscreteCloud grid_atoms(const GridDist& g) {
    std::vector<int> dims;
    for (const auto& a : g.axes) dims.push_back(a.m);
    const std::int64_t total = g.size();
    std::int64_t n = 0;
    for (std::int64_t c = 0; c < total; ++c)
        if (g.w[c] > 0.0) ++n;
    DiscreteCloud cloud;
    cloud.points.resize(n, g.dim());
    cloud.mass.resize(n);
    std::int64_t r = 0;
    for (std::int64_t c = 0; c < total; ++c) {
        if (g.w[c] <= 0.0) continue;
        int idx[kMaxGridDims];
        unravel(c, dims, idx);
        for (int d = 0; d < g.dim(); ++d) cloud.points(r, d) = g.axes[d].center(idx[d]);
        cloud.mass[r] = g.w[c];
        ++r;
    }
    return cloud;
}

// quantile of a 1-D grid at cumulative level u
double grid_quantile(const GridDist& g, const std::vector<double>& cum, double u) {
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    int j = static_cast<int>(it - cum.begin());
    if (j >= g.axes[0].m) j = g.axes[0].m - 1;
    return g.axes[0].center(j);
}

// exact 1-D quadratic transport cost through the quantile functions
double w2sq_quantile_1d(const GridDist& p, const GridDist& q) {
    const int mp = p.axes[0].m;
    const int mq = q.axes[0].m;
    std::vector<double> cp(mp), cq(mq);
    double s = 0.0;
    for (int j = 0; j < mp; ++j) cp[j] = (s += p.w[j]);
    s = 0.0;
    for (int j = 0; j < mq; ++j) cq[j] = (s += q.w[j]);

    std::vector<double> levels;
    levels.reserve(mp + mq + 1);
    levels.push_back(0.0);
    levels.insert(levels.end(), cp.begin(), cp.end());
    levels.insert(levels.end(), cq.begin(), cq.end());
    std::sort(levels.begin(), levels.end());

    double cost = 0.0;
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
        const double mass = levels[k + 1] - levels[k];
        if (mass <= 0.0) continue;
        const double mid = 0.5 * (levels[k] + levels[k + 1]);
        const double x = grid_quantile(p, cp, mid);
        const double y = grid_quantile(q, cq, mid);
        cost += mass * (x - y) * (x - y);
    }
    return cost;
}

}  // namespace

Divergence kl(const GaussianDist& p, const GaussianDist& q) {
    return {kl_gaussian(p, q), false};
}

Divergence kl(const GridDist& p, const GridDist& q) {
    check_same_axes(p, q, "kl");
    const auto r = kernels::kl_cells(p.w, q.w);
    return {r.infinite ? 0.0 : r.value, r.infinite};
}

Divergence fisher(const GaussianDist& p, const GaussianDist& q) {
    return {fisher_gaussian(p, q), false};
}

Divergence fisher(const GridDist& p, const GridDist& q) {
    check_same_axes(p, q, "fisher");
    const auto r = kernels::fisher_cells(p, q);
    return {r.infinite ? 0.0 : r.value, r.infinite};
}

double w2(const GaussianDist& p, const GaussianDist& q) { return w2_gaussian(p, q); }

W2Result w2(const GridDist& p, const GridDist& q, W2Method method, double sinkhorn_epsilon) {
    check_same_axes(p, q, "w2");
    if (p.dim() == 1 && method == W2Method::Exact)
        return {std::sqrt(std::max(0.0, w2sq_quantile_1d(p, q))), true};

    const DiscreteCloud a = grid_atoms(p);
    const DiscreteCloud b = grid_atoms(q);
    if (method == W2Method::Sinkhorn) {
        double eps = sinkhorn_epsilon;
        if (eps <= 0.0) {
            // default scale: a few percent of the mean pairwise cost
            double mean_cost = 0.0;
            for (int d = 0; d < p.dim(); ++d) {
                const double r = p.axes[d].hi - p.axes[d].lo;
                mean_cost += r * r / 6.0;
            }
            eps = 0.02 * mean_cost;
        }
        const auto r = sinkhorn_transport_cost(a, b, eps);
        return {std::sqrt(std::max(0.0, r.cost)), false};
    }
    return {std::sqrt(std::max(0.0, exact_transport_cost(a, b))), true};
}

double Coupling1D::cost() const {
    double c = 0.0;
    for (const auto& e : plan) {
        const double x = source.axes[0].center(e.i);
        const double y = target.axes[0].center(e.j);
        c += e.mass * (x - y) * (x - y);
    }
    return c;
}

Coupling1D monotone_coupling_1d(const GridDist& p, const GridDist& q) {
    if (p.dim() != 1 || q.dim() != 1)
        throw DimensionMismatch("monotone_coupling_1d needs 1-D grids");
    p.validate();
    q.validate();

    Coupling1D c;
    c.source = p;
    c.target = q;
    int i = 0, j = 0;
    const int mp = p.axes[0].m;
    const int mq = q.axes[0].m;
    double ai = p.w[0], bj = q.w[0];
    while (i < mp && j < mq) {
        if (ai <= 0.0) {
            if (++i >= mp) break;
            ai = p.w[i];
            continue;
        }
        if (bj <= 0.0) {
            if (++j >= mq) break;
            bj = q.w[j];
            continue;
        }
        const double m = std::min(ai, bj);
        c.plan.push_back({i, j, m});
        ai -= m;
        bj -= m;
    }
    return c;
}

namespace {

SlackReport lsi_report(Divergence d, Divergence fi, double constant) {
    if (!(constant > 0.0)) throw DimensionMismatch("check_lsi: constant must be positive");
    SlackReport r;
    r.d = d;
    r.fisher_info = fi;
    r.defined = !d.infinite && !fi.infinite;
    if (r.defined) {
        r.bound = fi.value / (2.0 * constant);
        r.slack = r.bound - d.value;
    }
    return r;
}

SlackReport ov_report(Divergence d, double w2_value, double rho) {
    if (!(rho > 0.0)) throw DimensionMismatch("check_otto_villani: rho must be positive");
    SlackReport r;
    r.d = d;
    r.w2_value = w2_value;
    r.defined = !d.infinite;
    if (r.defined) {
        r.bound = 2.0 / rho * d.value;
        r.slack = r.bound - w2_value * w2_value;
    }
    return r;
}

}  // namespace

SlackReport check_lsi(const GaussianDist& p, const GaussianDist& q, double constant) {
    return lsi_report(kl(p, q), fisher(p, q), constant);
}

SlackReport check_lsi(const GridDist& p, const GridDist& q, double constant) {
    return lsi_report(kl(p, q), fisher(p, q), constant);
}

SlackReport check_otto_villani(const GaussianDist& p, const GaussianDist& q, double rho) {
    return ov_report(kl(p, q), w2(p, q), rho);
}

SlackReport check_otto_villani(const GridDist& p, const GridDist& q, double rho) {
    return ov_report(kl(p, q), w2(p, q).value, rho);
}

ScoreDisplacementReport score_displacement_bound(const PotentialSpec& spec, const Eigen::VectorXd& u1,
                                   const Eigen::VectorXd& u2, const Eigen::VectorXd& t1,
                                   const Eigen::VectorXd& t2, const Eigen::VectorXd& zeta,
                                   const Certificate& cert) {
    const int n = spec.n;
    if (u1.size() != n || u2.size() != n || t1.size() != n || t2.size() != n ||
        zeta.size() != n)
        throw DimensionMismatch("score_displacement_bound: vectors must have length n");
    if (!cert.pass)
        throw NotPositiveDefinite("score_displacement_bound needs a certified spec");

    // The site-i gradient gap integrates the mixed partials over the moved
    // coordinates; diagonal perturbation terms cancel at equal zeta_i.
    double value = 0.0;
    for (int i = 0; i < n; ++i) {
        double gap = 0.0;
        for (int k = 0; k < i; ++k)
            gap += mixed_partial(spec, i, k, zeta) * (u1(k) - t1(k));
        for (int k = i + 1; k < n; ++k)
            gap += mixed_partial(spec, i, k, zeta) * (u2(k) - t2(k));
        value += gap * gap;
    }

    ScoreDisplacementReport r;
    r.value = value;
    const double factor = 0.5 * cert.rho * cert.rho * (1.0 - cert.delta) * (1.0 - cert.delta);
    r.bound = factor * ((u1 - t1).squaredNorm() + (u2 - t2).squaredNorm());
    r.slack = r.bound - value;
    r.halved = (u1 - t1).norm() == 0.0;
    if (r.halved) {
        r.bound_halved = 0.5 * r.bound;
        r.slack_halved = r.bound_halved - value;
    }
    return r;
}

}  // namespace lsi
