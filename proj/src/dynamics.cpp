#include "lsi/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsi/gridops.hpp"
#include "lsi/kernels.hpp"

namespace lsi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kEmptyCell = 1e-14;

std::vector<int> block_idx(int offset, int n) {
    std::vector<int> v(n);
    for (int k = 0; k < n; ++k) v[k] = offset + k;
    return v;
}

void require_quadratic(const PotentialSpec& spec, const char* what) {
    if (spec.variant != Variant::Quadratic)
        throw NoDecomposition(std::string(what) + " needs the quadratic variant");
}

void require_certified(const Certificate& cert, const char* what) {
    if (!cert.pass) throw NotCertified(std::string(what) + " needs a certified spec");
}

// ---------------------------------------------------------------------------
// sweep operator
// ---------------------------------------------------------------------------

Eigen::VectorXd q_mean_coeffs(const PotentialSpec& spec, int s) {
    // Q_s mean is -(sum_{k != s} M_sk x_k) / M_ss; coefficients listed in
    // window order (prefix sites ascending, then suffix sites ascending).
    Eigen::VectorXd b(spec.n - 1);
    int c = 0;
    for (int k = 0; k < s; ++k) b(c++) = -spec.precision(s, k) / spec.precision(s, s);
    for (int k = s + 1; k < spec.n; ++k)
        b(c++) = -spec.precision(s, k) / spec.precision(s, s);
    return b;
}

}  // namespace

std::vector<int> GridPairLaw::dims() const {
    std::vector<int> d;
    d.reserve(2 * axes.size());
    for (int rep = 0; rep < 2; ++rep)
        for (const auto& a : axes) d.push_back(a.m);
    return d;
}

std::int64_t GridPairLaw::block_size() const {
    std::int64_t s = 1;
    for (const auto& a : axes) s *= a.m;
    return s;
}

std::vector<int> GridTripleLaw::dims() const {
    std::vector<int> d;
    d.reserve(3 * axes.size());
    for (int rep = 0; rep < 3; ++rep)
        for (const auto& a : axes) d.push_back(a.m);
    return d;
}

PairLaw make_gaussian_pair(const GaussianDist& joint) {
    if (joint.dim() % 2 != 0) throw DimensionMismatch("pair law needs an even dimension");
    return {joint.dim() / 2, joint};
}

PairLaw make_grid_pair(GridPairLaw law) {
    const std::int64_t b = law.block_size();
    if (static_cast<std::int64_t>(law.w.size()) != b * b)
        throw DimensionMismatch("grid pair tensor size mismatch");
    return {law.n(), std::move(law)};
}

GaussianDist markov_step_g(const GaussianDist& law, const PotentialSpec& spec) {
    require_quadratic(spec, "gaussian sweep");
    if (law.dim() != spec.n) throw DimensionMismatch("markov_step_g: dimension mismatch");
    const int n = spec.n;
    GaussianDist g = law;  // [U], V coordinates appended one site at a time
    for (int s = 0; s < n; ++s) {
        std::vector<int> idx;
        Eigen::VectorXd coeff(n - 1);
        int c = 0;
        for (int k = 0; k < s; ++k) {
            idx.push_back(n + k);  // already-updated coordinates
            coeff(c++) = -spec.precision(s, k) / spec.precision(s, s);
        }
        for (int k = s + 1; k < n; ++k) {
            idx.push_back(k);  // old coordinates
            coeff(c++) = -spec.precision(s, k) / spec.precision(s, s);
        }
        gaussian_append_affine(g, idx, coeff, 0.0, 1.0 / spec.precision(s, s));
    }
    return gaussian_marginal(g, block_idx(n, n));
}

GridDist markov_step_g(const GridDist& law, const PotentialSpec& spec) {
    if (law.dim() != spec.n) throw DimensionMismatch("markov_step_g: dimension mismatch");
    law.validate();
    GridDist out = law;
    std::vector<int> dims;
    for (const auto& a : law.axes) dims.push_back(a.m);
    for (int s = 0; s < spec.n; ++s) {
        const auto qtab = conditional_table(spec, law.axes, s);
        kernels::sweep_site(out.w, dims, s, qtab);
    }
    return out;
}

namespace {

template <class Dist, class W2Fn>
ContractionReport contraction_impl(const PotentialSpec& spec, const Certificate& cert,
                                   const Dist& sigma, const Dist& pi, W2Fn&& wfn) {
    require_certified(cert, "contraction_check");
    ContractionReport r;
    r.w2_before = wfn(sigma, pi);
    r.w2_after = wfn(markov_step_g(sigma, spec), markov_step_g(pi, spec));
    const double f = (1.0 - cert.delta) * (1.0 - cert.delta);
    r.bound = f * r.w2_before * r.w2_before;
    r.slack = r.bound - r.w2_after * r.w2_after;
    return r;
}

template <class Dist, class W2Fn>
FixedPointResult<Dist> fixed_point_impl(const PotentialSpec& spec, const Certificate& cert,
                                        const Dist& init, double tol, W2Fn&& wfn) {
    require_certified(cert, "fixed_point");
    if (!(tol > 0.0)) throw DimensionMismatch("fixed_point: tol must be positive");
    FixedPointResult<Dist> r;
    r.dist = init;
    Dist next = markov_step_g(init, spec);
    double d = wfn(r.dist, next);
    r.dist = std::move(next);
    r.iterations = 1;
    r.last_step_w2 = d;
    if (d < tol) {
        r.cap = 1;
        return r;
    }
    r.cap = static_cast<int>(std::ceil(std::log(tol / d) / std::log(1.0 - cert.delta))) + 10;
    while (r.iterations < r.cap) {
        next = markov_step_g(r.dist, spec);
        d = wfn(r.dist, next);
        r.dist = std::move(next);
        ++r.iterations;
        r.last_step_w2 = d;
        if (d < tol) return r;
    }
    r.hit_cap = true;
    return r;
}

}  // namespace

ContractionReport contraction_check(const PotentialSpec& spec, const Certificate& cert,
                                    const GaussianDist& sigma, const GaussianDist& pi) {
    return contraction_impl(spec, cert, sigma, pi,
                            [](const GaussianDist& a, const GaussianDist& b) {
                                return w2_gaussian(a, b);
                            });
}

ContractionReport contraction_check(const PotentialSpec& spec, const Certificate& cert,
                                    const GridDist& sigma, const GridDist& pi) {
    return contraction_impl(spec, cert, sigma, pi, [](const GridDist& a, const GridDist& b) {
        return w2(a, b).value;
    });
}

FixedPointResult<GaussianDist> fixed_point(const PotentialSpec& spec,
                                           const Certificate& cert,
                                           const GaussianDist& init, double tol) {
    return fixed_point_impl(spec, cert, init, tol,
                            [](const GaussianDist& a, const GaussianDist& b) {
                                return w2_gaussian(a, b);
                            });
}

FixedPointResult<GridDist> fixed_point(const PotentialSpec& spec, const Certificate& cert,
                                       const GridDist& init, double tol) {
    return fixed_point_impl(spec, cert, init, tol, [](const GridDist& a, const GridDist& b) {
        return w2(a, b).value;
    });
}

// ---------------------------------------------------------------------------
// loosely connected copy
// ---------------------------------------------------------------------------

namespace {

// Forward copy construction: dist(Shat) := dist(S), then Yhat_i is drawn
// from the input conditional dist(Y_i | Y^{i-1}, S_i^n), which enforces the
// loose-connection Markov relations while preserving every window law.
GaussianDist lcc_gaussian(const GaussianDist& pair, int n) {
    GaussianDist out = gaussian_marginal(pair, block_idx(n, n));
    for (int s = 0; s < n; ++s) {
        std::vector<int> win_in, win_out;
        for (int k = 0; k < s; ++k) {
            win_in.push_back(k);
            win_out.push_back(n + k);
        }
        for (int k = s + 1; k < n; ++k) {
            win_in.push_back(n + k);
            win_out.push_back(k);
        }
        const ScalarConditional c = gaussian_conditional_scalar(pair, s, win_in);
        gaussian_append_affine(out, win_out, c.alpha, c.alpha0, c.var);
    }
    std::vector<int> perm = block_idx(n, n);
    const std::vector<int> sblock = block_idx(0, n);
    perm.insert(perm.end(), sblock.begin(), sblock.end());
    return gaussian_marginal(out, perm);
}

// Window marginal of a pair tensor for site s: keeps first-block coords
// 0..s and second-block coords s+1..n-1, which is configuration-shaped.
std::vector<double> window_marginal(const std::vector<double>& w, int n,
                                    const std::vector<int>& dims2n, int s) {
    std::vector<bool> keep(2 * n, false);
    for (int k = 0; k <= s; ++k) keep[k] = true;
    for (int k = s + 1; k < n; ++k) keep[n + k] = true;
    return kernels::marginalize(w, dims2n, keep);
}

// Normalize the axis-s columns of a configuration-shaped tensor into
// conditionals; empty columns inherit the fallback column (Q_i when a spec
// is at hand, uniform otherwise).
std::vector<double> column_conditionals(const std::vector<double>& joint,
                                        const std::vector<int>& dims, int s,
                                        const std::vector<double>* fallback) {
    const auto strides = row_major_strides(dims);
    const std::int64_t total = tensor_size(dims);
    const int m = dims[s];
    const std::int64_t step = strides[s];
    const std::int64_t cols = total / m;

    std::vector<int> rdims;
    std::vector<std::int64_t> rstrides;
    for (std::size_t d = 0; d < dims.size(); ++d)
        if (static_cast<int>(d) != s) {
            rdims.push_back(dims[d]);
            rstrides.push_back(strides[d]);
        }

    std::vector<double> cond(total);
    const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t col = 0; col < cols; ++col) {
        std::int64_t base = 0;
        std::int64_t rest = col;
        for (int d = static_cast<int>(rdims.size()) - 1; d >= 0; --d) {
            base += (rest % rdims[d]) * rstrides[d];
            rest /= rdims[d];
        }
        double mass = 0.0;
        for (int j = 0; j < m; ++j) mass += joint[base + j * step];
        if (mass < kEmptyCell) {
            for (int j = 0; j < m; ++j)
                cond[base + j * step] = fallback ? (*fallback)[base + j * step] : 1.0 / m;
        } else {
            for (int j = 0; j < m; ++j) cond[base + j * step] = joint[base + j * step] / mass;
        }
    }
    return cond;
}

GridPairLaw lcc_grid(const GridPairLaw& pair,
                     const std::vector<std::vector<double>>* qtabs) {
    const int n = pair.n();
    const auto dims2n = pair.dims();
    std::vector<int> cdims(dims2n.begin(), dims2n.begin() + n);
    const auto cstrides = row_major_strides(cdims);

    std::vector<bool> keep_second(2 * n, false);
    for (int k = 0; k < n; ++k) keep_second[n + k] = true;
    const std::vector<double> marg_s = kernels::marginalize(pair.w, dims2n, keep_second);

    std::vector<std::vector<double>> cond(n);
    for (int s = 0; s < n; ++s) {
        const auto joint = window_marginal(pair.w, n, dims2n, s);
        cond[s] = column_conditionals(joint, cdims, s, qtabs ? &(*qtabs)[s] : nullptr);
    }

    GridPairLaw out;
    out.axes = pair.axes;
    const std::int64_t mb = pair.block_size();
    out.w.assign(mb * mb, 0.0);
    const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t yf = 0; yf < mb; ++yf) {
        std::vector<int> y(n), sp(n);
        unravel(yf, cdims, y.data());
        for (std::int64_t sf = 0; sf < mb; ++sf) {
            unravel(sf, cdims, sp.data());
            double v = marg_s[sf];
            for (int s = 0; s < n && v != 0.0; ++s) {
                std::int64_t cidx = 0;
                for (int k = 0; k <= s; ++k) cidx += y[k] * cstrides[k];
                for (int k = s + 1; k < n; ++k) cidx += sp[k] * cstrides[k];
                v *= cond[s][cidx];
            }
            out.w[yf * mb + sf] = v;
        }
    }
    return out;
}

}  // namespace

PairLaw loosely_connected_copy(const PairLaw& joint) {
    if (std::holds_alternative<GaussianDist>(joint.law))
        return {joint.n, lcc_gaussian(std::get<GaussianDist>(joint.law), joint.n)};
    return {joint.n, lcc_grid(std::get<GridPairLaw>(joint.law), nullptr)};
}

// ---------------------------------------------------------------------------
// Q-extension
// ---------------------------------------------------------------------------

namespace {

// Appends eta coordinates to g: dist(eta_s | window) = Q_s, coupled with the
// older-block coordinate A_s by the monotone map (affine between Gaussians).
// Returns E|A - eta|^2.
double extend_with_eta_gaussian(GaussianDist& g, int off_a, int off_b, int n,
                                const PotentialSpec& spec) {
    double total = 0.0;
    for (int s = 0; s < n; ++s) {
        std::vector<int> win;
        for (int k = 0; k < s; ++k) win.push_back(off_a + k);
        for (int k = s + 1; k < n; ++k) win.push_back(off_b + k);
        const int target = off_a + s;
        const ScalarConditional pc = gaussian_conditional_scalar(g, target, win);
        const Eigen::VectorXd bq = q_mean_coeffs(spec, s);
        const double vq = 1.0 / spec.precision(s, s);

        double slope = 0.0, noise = vq;
        if (pc.var > 1e-13 * vq) {
            slope = std::sqrt(vq / pc.var);
            noise = 0.0;
        }
        std::vector<int> idx = win;
        idx.push_back(target);
        Eigen::VectorXd coeff(win.size() + 1);
        for (std::size_t k = 0; k < win.size(); ++k) coeff(k) = bq(k) - slope * pc.alpha(k);
        coeff(win.size()) = slope;
        gaussian_append_affine(g, idx, coeff, -slope * pc.alpha0, noise);

        const int e = g.dim() - 1;
        const double dm = g.mean(target) - g.mean(e);
        total += g.cov(target, target) + g.cov(e, e) - 2.0 * g.cov(target, e) + dm * dm;
    }
    return total;
}

// Per-site monotone coupling tables for the grid extension of a pair law.
struct SitePlan {
    int m = 0;
    std::int64_t ncols = 0;
    std::vector<double> cond;  // [col][y][e], conditional of eta given y and window
    double cost = 0.0;         // E|A_s - eta_s|^2
};

std::vector<SitePlan> build_ext_plans(const GridPairLaw& pair, const PotentialSpec& spec,
                                      double* total_cost) {
    const int n = pair.n();
    const auto dims2n = pair.dims();
    std::vector<int> cdims(dims2n.begin(), dims2n.begin() + n);
    const auto cstrides = row_major_strides(cdims);
    std::vector<SitePlan> plans(n);
    double total = 0.0;

    for (int s = 0; s < n; ++s) {
        const auto joint = window_marginal(pair.w, n, dims2n, s);
        const auto qtab = conditional_table(spec, pair.axes, s);
        const int m = cdims[s];
        const std::int64_t step = cstrides[s];
        const std::int64_t cols = tensor_size(cdims) / m;

        std::vector<int> rdims;
        std::vector<std::int64_t> rstrides;
        for (int d = 0; d < n; ++d)
            if (d != s) {
                rdims.push_back(cdims[d]);
                rstrides.push_back(cstrides[d]);
            }

        SitePlan& plan = plans[s];
        plan.m = m;
        plan.ncols = cols;
        plan.cond.assign(cols * m * m, 0.0);
        double site_cost = 0.0;

        std::vector<double> pcol(m), qcol(m);
        for (std::int64_t col = 0; col < cols; ++col) {
            std::int64_t base = 0;
            std::int64_t rest = col;
            for (int d = static_cast<int>(rdims.size()) - 1; d >= 0; --d) {
                base += (rest % rdims[d]) * rstrides[d];
                rest /= rdims[d];
            }
            double mass = 0.0;
            for (int j = 0; j < m; ++j) {
                pcol[j] = joint[base + j * step];
                qcol[j] = qtab[base + j * step];
                mass += pcol[j];
            }
            if (mass < kEmptyCell) {
                pcol = qcol;  // measure-null cell inherits Q_s
                mass = 0.0;
            } else {
                for (int j = 0; j < m; ++j) pcol[j] /= mass;
            }

            // monotone coupling of (pcol, qcol)
            double* crow = &plan.cond[col * m * m];
            double cost_col = 0.0;
            {
                int i = 0, j = 0;
                double ai = pcol[0], bj = qcol[0];
                while (i < m && j < m) {
                    if (ai <= 0.0) {
                        if (++i >= m) break;
                        ai = pcol[i];
                        continue;
                    }
                    if (bj <= 0.0) {
                        if (++j >= m) break;
                        bj = qcol[j];
                        continue;
                    }
                    const double mv = std::min(ai, bj);
                    crow[i * m + j] += mv;
                    const double dx = pair.axes[s].center(i) - pair.axes[s].center(j);
                    cost_col += mv * dx * dx;
                    ai -= mv;
                    bj -= mv;
                }
            }
            site_cost += mass * cost_col;
            for (int i = 0; i < m; ++i) {
                if (pcol[i] > 0.0) {
                    for (int j = 0; j < m; ++j) crow[i * m + j] /= pcol[i];
                } else {
                    crow[i * m + i] = 1.0;  // unused row, keep it stochastic
                }
            }
        }
        plan.cost = site_cost;
        total += site_cost;
    }
    if (total_cost) *total_cost = total;
    return plans;
}

GridTripleLaw q_extension_grid(const GridPairLaw& pair, const PotentialSpec& spec) {
    const int n = pair.n();
    const auto plans = build_ext_plans(pair, spec, nullptr);
    std::vector<int> cdims;
    for (const auto& a : pair.axes) cdims.push_back(a.m);
    const auto cstrides = row_major_strides(cdims);
    const std::int64_t mb = pair.block_size();

    GridTripleLaw out;
    out.axes = pair.axes;
    out.w.assign(mb * mb * mb, 0.0);
    const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t yf = 0; yf < mb; ++yf) {
        std::vector<int> y(n), sp(n), e(n);
        unravel(yf, cdims, y.data());
        for (std::int64_t sf = 0; sf < mb; ++sf) {
            const double base_mass = pair.w[yf * mb + sf];
            if (base_mass == 0.0) continue;
            unravel(sf, cdims, sp.data());
            for (std::int64_t ef = 0; ef < mb; ++ef) {
                unravel(ef, cdims, e.data());
                double v = base_mass;
                for (int s = 0; s < n && v != 0.0; ++s) {
                    // window cell index over the axes other than s
                    std::int64_t col = 0;
                    for (int k = 0; k < n; ++k) {
                        if (k == s) continue;
                        col = col * cdims[k] + (k < s ? y[k] : sp[k]);
                    }
                    v *= plans[s].cond[(col * plans[s].m + y[s]) * plans[s].m + e[s]];
                }
                out.w[(yf * mb + sf) * mb + ef] = v;
            }
        }
    }
    return out;
}

}  // namespace

TripleLaw q_extension(const PairLaw& joint, const PotentialSpec& spec) {
    if (joint.n != spec.n) throw DimensionMismatch("q_extension: dimension mismatch");
    if (std::holds_alternative<GaussianDist>(joint.law)) {
        require_quadratic(spec, "gaussian q_extension");
        GaussianDist g = std::get<GaussianDist>(joint.law);
        extend_with_eta_gaussian(g, 0, joint.n, joint.n, spec);
        return {joint.n, std::move(g)};
    }
    return {joint.n, q_extension_grid(std::get<GridPairLaw>(joint.law), spec)};
}

// ---------------------------------------------------------------------------
// per-step conditional relative entropy D_t of a pair law
// ---------------------------------------------------------------------------

namespace {

double pair_dterm_gaussian(const GaussianDist& pair, int n, const PotentialSpec& spec) {
    double total = 0.0;
    for (int s = 0; s < n; ++s) {
        std::vector<int> win;
        for (int k = 0; k < s; ++k) win.push_back(k);
        for (int k = s + 1; k < n; ++k) win.push_back(n + k);
        const ScalarConditional pc = gaussian_conditional_scalar(pair, s, win);
        const Eigen::VectorXd bq = q_mean_coeffs(spec, s);
        const double vq = 1.0 / spec.precision(s, s);
        const double vp = std::max(pc.var, 1e-300);

        const GaussianDist wm = gaussian_marginal(pair, win);
        const Eigen::VectorXd d = pc.alpha - bq;
        const double gap = pc.alpha0 + d.dot(wm.mean);
        const double eg2 = gap * gap + d.dot(wm.cov * d);
        total += 0.5 * (vp / vq - 1.0 - std::log(vp / vq)) + eg2 / (2.0 * vq);
    }
    return total;
}

double pair_dterm_grid(const GridPairLaw& pair,
                       const std::vector<std::vector<double>>& qtabs) {
    const int n = pair.n();
    const auto dims2n = pair.dims();
    std::vector<int> cdims(dims2n.begin(), dims2n.begin() + n);
    double total = 0.0;
    for (int s = 0; s < n; ++s) {
        const auto joint = window_marginal(pair.w, n, dims2n, s);
        total += kernels::column_kl(joint, cdims, s, qtabs[s]);
    }
    return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// interpolation process, Gaussian fast path
// ---------------------------------------------------------------------------

namespace {

double max_abs_gap(const GaussianDist& a, const GaussianDist& b) {
    double g = (a.mean - b.mean).cwiseAbs().maxCoeff();
    g = std::max(g, (a.cov - b.cov).cwiseAbs().maxCoeff());
    return g;
}

Trace run_interpolation_gaussian(const GaussianDist& p0, const PotentialSpec& spec,
                                 const Certificate& cert, int steps) {
    require_quadratic(spec, "gaussian interpolation");
    require_certified(cert, "run_interpolation");
    if (steps < 1) throw UsageError("run_interpolation needs at least one step");
    if (p0.dim() != spec.n) throw DimensionMismatch("p0 dimension mismatch");
    const int n = spec.n;

    Trace trace;
    trace.certificate = cert;
    trace.backend = "gaussian";
    trace.records.resize(steps + 1);
    for (int t = 0; t <= steps; ++t)
        trace.records[t] = {t, kNaN, kNaN, kNaN};

    GaussianDist q;
    q.mean = Eigen::VectorXd::Zero(n);
    q.cov = Eigen::LLT<Eigen::MatrixXd>(spec.precision)
                .solve(Eigen::MatrixXd::Identity(n, n));
    trace.d_initial = kl_gaussian(p0, q);
    trace.fisher_initial = fisher_gaussian(p0, q);

    // diagonal coupling of (p0, p0)
    GaussianDist diag;
    diag.mean.resize(2 * n);
    diag.mean << p0.mean, p0.mean;
    diag.cov.resize(2 * n, 2 * n);
    diag.cov << p0.cov, p0.cov, p0.cov, p0.cov;

    const GaussianDist l1 = lcc_gaussian(diag, n);  // dist(Y(0), Y(1))
    trace.records[0].d_t = pair_dterm_gaussian(l1, n, spec);

    // extend with eta(2), then attach eta(1) through the (first | second)
    // conditional kernel of L1, so that (eta(1), Y(0)) is itself a loosely
    // connected copy of the diagonal and eta(1) decouples from the rest
    // given Y(0)
    GaussianDist g = l1;
    const double cost2 = extend_with_eta_gaussian(g, 0, n, n, spec);
    if (steps >= 2) trace.records[2].w2_skip2_bound = cost2;
    const BlockConditional eta1_kernel =
        gaussian_conditional_block(l1, block_idx(0, n), block_idx(n, n));
    gaussian_append_affine_block(g, block_idx(0, n), eta1_kernel.coeff,
                                 eta1_kernel.offset, eta1_kernel.cov);
    // g = [Y0 | Y1 | eta2 | eta1]

    std::vector<int> eta_pair_idx = block_idx(3 * n, n);
    {
        const auto e2 = block_idx(2 * n, n);
        eta_pair_idx.insert(eta_pair_idx.end(), e2.begin(), e2.end());
    }
    GaussianDist npair = gaussian_marginal(g, eta_pair_idx);  // [eta1 | eta2]
    trace.records[1].d_t = pair_dterm_gaussian(npair, n, spec);

    GaussianDist lnext = lcc_gaussian(npair, n);  // dist(Y(1), Y(2))

    // state [eta(t) | Y(t-1) | Y(t)] for t = 2
    std::vector<int> ridx = block_idx(2 * n, n);
    {
        const auto y1 = block_idx(n, n);
        ridx.insert(ridx.end(), y1.begin(), y1.end());
    }
    GaussianDist state = gaussian_marginal(g, ridx);  // [eta2 | Y1]
    {
        const BlockConditional k2 =
            gaussian_conditional_block(lnext, block_idx(n, n), block_idx(0, n));
        gaussian_append_affine_block(state, block_idx(n, n), k2.coeff, k2.offset, k2.cov);
    }

    for (int t = 2; t <= steps; ++t) {
        // consistency of dist(Y(t)) with dist(eta(t))
        trace.marginal_consistency =
            std::max(trace.marginal_consistency,
                     max_abs_gap(gaussian_marginal(state, block_idx(0, n)),
                                 gaussian_marginal(state, block_idx(2 * n, n))));

        GaussianDist ext = state;
        const double cost = extend_with_eta_gaussian(ext, n, 2 * n, n, spec);
        if (t + 1 <= steps) trace.records[t + 1].w2_skip2_bound = cost;

        std::vector<int> pidx = block_idx(0, n);
        {
            const auto enew = block_idx(3 * n, n);
            pidx.insert(pidx.end(), enew.begin(), enew.end());
        }
        npair = gaussian_marginal(ext, pidx);  // [eta(t) | eta(t+1)]
        trace.records[t].d_t = pair_dterm_gaussian(npair, n, spec);

        lnext = lcc_gaussian(npair, n);  // dist(Y(t), Y(t+1))

        std::vector<int> nidx = block_idx(3 * n, n);
        {
            const auto ycur = block_idx(2 * n, n);
            nidx.insert(nidx.end(), ycur.begin(), ycur.end());
        }
        state = gaussian_marginal(ext, nidx);  // [eta(t+1) | Y(t)]
        const BlockConditional kn =
            gaussian_conditional_block(lnext, block_idx(n, n), block_idx(0, n));
        gaussian_append_affine_block(state, block_idx(n, n), kn.coeff, kn.offset, kn.cov);
    }

    trace.d_final = kl_gaussian(gaussian_marginal(lnext, block_idx(n, n)), q);

    const double f = 0.5 * (1.0 - cert.delta) * (1.0 - cert.delta);
    for (int t = 2; t <= steps; ++t)
        trace.records[t].recursion_slack =
            f * (trace.records[t - 2].d_t + trace.records[t - 1].d_t) -
            trace.records[t].d_t;
    return trace;
}

// ---------------------------------------------------------------------------
// interpolation process, grid backend (n <= 2)
// ---------------------------------------------------------------------------

// eta-pair contraction N(e, e') = sum_{a,b} state(e, a, b) prod_s plan_s;
// factored so the work stays at O(m^{3n+2}).
std::vector<double> eta_pair_from_state(const std::vector<double>& state,
                                        const std::vector<SitePlan>& plans, int n,
                                        std::int64_t mb, int m) {
    std::vector<double> npair(mb * mb, 0.0);
    const int nt = kernels::threads();
    if (n == 1) {
        // T1(e, a) = sum_b state; N(e, e') = sum_a T1 cond0[a][e']
        std::vector<double> t1(mb * mb, 0.0);
        for (std::int64_t e = 0; e < mb; ++e)
            for (std::int64_t a = 0; a < mb; ++a) {
                double acc = 0.0;
                for (std::int64_t b = 0; b < mb; ++b) acc += state[(e * mb + a) * mb + b];
                t1[e * mb + a] = acc;
            }
        for (std::int64_t e = 0; e < mb; ++e)
            for (std::int64_t a = 0; a < mb; ++a) {
                const double v = t1[e * mb + a];
                if (v == 0.0) continue;
                const double* crow = &plans[0].cond[a * m];
                for (int ep = 0; ep < m; ++ep) npair[e * mb + ep] += v * crow[ep];
            }
        return npair;
    }

    // n == 2: blocks are (x0, x1) with flat index x0 m + x1
    const std::int64_t m2 = mb;  // m^2
    // T1(e, a, b1) = sum_b0 state(e, a, b0 m + b1)
    std::vector<double> t1(m2 * m2 * m, 0.0);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t e = 0; e < m2; ++e)
        for (std::int64_t a = 0; a < m2; ++a) {
            const double* src = &state[(e * m2 + a) * m2];
            double* dst = &t1[(e * m2 + a) * m];
            for (int b0 = 0; b0 < m; ++b0)
                for (int b1 = 0; b1 < m; ++b1) dst[b1] += src[b0 * m + b1];
        }

    // T2(e, a0, b1, e1') = sum_a1 T1(e, a0 m + a1, b1) cond1[a0][a1][e1']
    std::vector<double> t2(m2 * m * m * m, 0.0);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t e = 0; e < m2; ++e)
        for (int a0 = 0; a0 < m; ++a0)
            for (int a1 = 0; a1 < m; ++a1) {
                const double* t1row = &t1[(e * m2 + a0 * m + a1) * m];
                const double* crow = &plans[1].cond[(a0 * m + a1) * m];
                double* dst = &t2[((e * m + a0) * m) * m];
                for (int b1 = 0; b1 < m; ++b1) {
                    const double v = t1row[b1];
                    if (v == 0.0) continue;
                    for (int e1 = 0; e1 < m; ++e1) dst[b1 * m + e1] += v * crow[e1];
                }
            }

    // N(e, e0' m + e1') = sum_{a0, b1} T2(e, a0, b1, e1') cond0[b1][a0][e0']
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::int64_t e = 0; e < m2; ++e) {
        double* nrow = &npair[e * m2];
        for (int a0 = 0; a0 < m; ++a0)
            for (int b1 = 0; b1 < m; ++b1) {
                const double* t2row = &t2[(((e * m + a0) * m) + b1) * m];
                const double* crow = &plans[0].cond[(b1 * m + a0) * m];
                for (int e0 = 0; e0 < m; ++e0) {
                    const double c0 = crow[e0];
                    if (c0 == 0.0) continue;
                    for (int e1 = 0; e1 < m; ++e1)
                        nrow[e0 * m + e1] += t2row[e1] * c0;
                }
            }
    }
    return npair;
}

// B(e', b) = sum_a L(a, b) prod_s plan_s(e'_s | a_s, window(a, b))
std::vector<double> eta_marginal_from_pair(const std::vector<double>& lpair,
                                           const std::vector<SitePlan>& plans, int n,
                                           std::int64_t mb, int m) {
    std::vector<double> out(mb * mb, 0.0);
    const int nt = kernels::threads();
    if (n == 1) {
        for (std::int64_t a = 0; a < mb; ++a) {
            const double* crow = &plans[0].cond[a * m];
            for (std::int64_t b = 0; b < mb; ++b) {
                const double v = lpair[a * mb + b];
                if (v == 0.0) continue;
                for (int ep = 0; ep < m; ++ep) out[ep * mb + b] += v * crow[ep];
            }
        }
        return out;
    }

    const std::int64_t m2 = mb;
    // C(a0, b, e1') = sum_a1 L(a0 m + a1, b) cond1[a0][a1][e1']
    std::vector<double> c(m * m2 * m, 0.0);
    for (int a0 = 0; a0 < m; ++a0)
        for (int a1 = 0; a1 < m; ++a1) {
            const double* lrow = &lpair[(a0 * m + a1) * m2];
            const double* crow = &plans[1].cond[(a0 * m + a1) * m];
            double* dst = &c[a0 * m2 * m];
            for (std::int64_t b = 0; b < m2; ++b) {
                const double v = lrow[b];
                if (v == 0.0) continue;
                for (int e1 = 0; e1 < m; ++e1) dst[b * m + e1] += v * crow[e1];
            }
        }
    // B(e0' m + e1', b) = sum_a0 C(a0, b, e1') cond0[b1][a0][e0']
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (int e0 = 0; e0 < m; ++e0)
        for (int e1 = 0; e1 < m; ++e1)
            for (std::int64_t b = 0; b < m2; ++b) {
                const int b1 = static_cast<int>(b % m);
                double acc = 0.0;
                for (int a0 = 0; a0 < m; ++a0)
                    acc += c[(a0 * m2 + b) * m + e1] * plans[0].cond[(b1 * m + a0) * m + e0];
                out[(e0 * m + e1) * m2 + b] = acc;
            }
    return out;
}

// full-block conditional tables of a pair tensor
std::vector<double> block_conditional_rows(const std::vector<double>& pair, std::int64_t mb,
                                           bool first_given_second) {
    std::vector<double> table(mb * mb, 0.0);
    if (first_given_second) {
        for (std::int64_t b = 0; b < mb; ++b) {
            double mass = 0.0;
            for (std::int64_t a = 0; a < mb; ++a) mass += pair[a * mb + b];
            if (mass < kEmptyCell) {
                table[b * mb + b] = 1.0;
                continue;
            }
            for (std::int64_t a = 0; a < mb; ++a) table[b * mb + a] = pair[a * mb + b] / mass;
        }
    } else {
        for (std::int64_t a = 0; a < mb; ++a) {
            double mass = 0.0;
            for (std::int64_t b = 0; b < mb; ++b) mass += pair[a * mb + b];
            if (mass < kEmptyCell) {
                table[a * mb + a] = 1.0;
                continue;
            }
            for (std::int64_t b = 0; b < mb; ++b) table[a * mb + b] = pair[a * mb + b] / mass;
        }
    }
    return table;
}

Trace run_interpolation_grid(const GridDist& p0, const PotentialSpec& spec,
                             const Certificate& cert, int steps) {
    require_certified(cert, "run_interpolation");
    if (steps < 1) throw UsageError("run_interpolation needs at least one step");
    if (p0.dim() != spec.n) throw DimensionMismatch("p0 dimension mismatch");
    if (spec.n > 2) throw CapacityExceeded("grid interpolation supports n <= 2");
    for (const auto& a : p0.axes)
        if (a.m > 16) throw CapacityExceeded("grid interpolation supports at most 16 points per axis");
    p0.validate();

    const int n = spec.n;
    const int m = p0.axes[0].m;
    for (const auto& a : p0.axes)
        if (a.m != m) throw CapacityExceeded("grid interpolation needs equal axis sizes");
    std::int64_t mb = 1;
    for (int k = 0; k < n; ++k) mb *= m;

    Trace trace;
    trace.certificate = cert;
    trace.backend = "grid";
    trace.grid_points = m;
    trace.box_lo = p0.axes[0].lo;
    trace.box_hi = p0.axes[0].hi;
    trace.records.resize(steps + 1);
    for (int t = 0; t <= steps; ++t)
        trace.records[t] = {t, kNaN, kNaN, kNaN};

    const GridDist qgrid = grid_gibbs(spec, p0.axes);
    {
        const Divergence d0 = kl(p0, qgrid);
        const Divergence f0 = fisher(p0, qgrid);
        if (d0.infinite || f0.infinite)
            throw NotNormalizable("p0 must be positive wherever the Gibbs grid is");
        trace.d_initial = d0.value;
        trace.fisher_initial = f0.value;
    }

    std::vector<std::vector<double>> qtabs(n);
    for (int s = 0; s < n; ++s) qtabs[s] = conditional_table(spec, p0.axes, s);

    // diagonal coupling of (p0, p0)
    GridPairLaw diag;
    diag.axes = p0.axes;
    diag.w.assign(mb * mb, 0.0);
    for (std::int64_t y = 0; y < mb; ++y) diag.w[y * mb + y] = p0.w[y];

    GridPairLaw l1 = lcc_grid(diag, &qtabs);  // dist(Y(0), Y(1))
    trace.records[0].d_t = pair_dterm_grid(l1, qtabs);

    double cost2 = 0.0;
    auto plans = build_ext_plans(l1, spec, &cost2);
    if (steps >= 2) trace.records[2].w2_skip2_bound = cost2;

    // state S(e1, a, b) = kappa1(e1 | a) L1(a, b), then contract with the
    // eta(2) plans to get dist(eta(1), eta(2))
    const auto kappa1 = block_conditional_rows(l1.w, mb, /*first_given_second=*/true);
    std::vector<double> init_state(mb * mb * mb, 0.0);
    {
        const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
        for (std::int64_t e = 0; e < mb; ++e)
            for (std::int64_t a = 0; a < mb; ++a) {
                const double k = kappa1[a * mb + e];
                if (k == 0.0) continue;
                for (std::int64_t b = 0; b < mb; ++b)
                    init_state[(e * mb + a) * mb + b] = k * l1.w[a * mb + b];
            }
    }
    GridPairLaw npair;
    npair.axes = p0.axes;
    npair.w = eta_pair_from_state(init_state, plans, n, mb, m);
    init_state.clear();
    init_state.shrink_to_fit();
    trace.records[1].d_t = pair_dterm_grid(npair, qtabs);

    GridPairLaw lnext = lcc_grid(npair, &qtabs);  // dist(Y(1), Y(2))

    // state R(e(t), Y(t-1), Y(t)) for t = 2
    std::vector<double> state(mb * mb * mb, 0.0);
    {
        const auto beta = eta_marginal_from_pair(l1.w, plans, n, mb, m);  // (eta2, Y1)
        const auto kappa = block_conditional_rows(lnext.w, mb, false);
        const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
        for (std::int64_t e = 0; e < mb; ++e)
            for (std::int64_t y1 = 0; y1 < mb; ++y1) {
                const double v = beta[e * mb + y1];
                if (v == 0.0) continue;
                for (std::int64_t y2 = 0; y2 < mb; ++y2)
                    state[(e * mb + y1) * mb + y2] = v * kappa[y1 * mb + y2];
            }
    }
    GridPairLaw lcur = lnext;

    const std::vector<int> dims3(3, static_cast<int>(mb));
    for (int t = 2; t <= steps; ++t) {
        // dist(Y(t)) vs dist(eta(t))
        {
            std::vector<double> me =
                kernels::marginalize(state, dims3, {true, false, false});
            std::vector<double> my =
                kernels::marginalize(state, dims3, {false, false, true});
            double gap = 0.0;
            for (std::int64_t c = 0; c < mb; ++c) gap = std::max(gap, std::abs(me[c] - my[c]));
            trace.marginal_consistency = std::max(trace.marginal_consistency, gap);
        }

        GridPairLaw pcur;  // (Y(t-1), Y(t)) marginal of the state
        pcur.axes = p0.axes;
        pcur.w = kernels::marginalize(state, dims3, {false, true, true});

        double cost = 0.0;
        plans = build_ext_plans(pcur, spec, &cost);
        if (t + 1 <= steps) trace.records[t + 1].w2_skip2_bound = cost;

        npair.w = eta_pair_from_state(state, plans, n, mb, m);
        trace.records[t].d_t = pair_dterm_grid(npair, qtabs);

        lnext = lcc_grid(npair, &qtabs);

        const auto beta = eta_marginal_from_pair(pcur.w, plans, n, mb, m);
        const auto kappa = block_conditional_rows(lnext.w, mb, false);
        const int nt = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
        for (std::int64_t e = 0; e < mb; ++e)
            for (std::int64_t y1 = 0; y1 < mb; ++y1) {
                const double v = beta[e * mb + y1];
                for (std::int64_t y2 = 0; y2 < mb; ++y2)
                    state[(e * mb + y1) * mb + y2] =
                        v == 0.0 ? 0.0 : v * kappa[y1 * mb + y2];
            }
        lcur = lnext;
    }

    GridDist yfinal;
    yfinal.axes = p0.axes;
    yfinal.w = kernels::marginalize(lcur.w, {static_cast<int>(mb), static_cast<int>(mb)},
                                    {false, true});
    // tiny renormalization guard before the divergence
    yfinal.normalize();
    trace.d_final = kl(yfinal, qgrid).value;

    const double f = 0.5 * (1.0 - cert.delta) * (1.0 - cert.delta);
    for (int t = 2; t <= steps; ++t)
        trace.records[t].recursion_slack =
            f * (trace.records[t - 2].d_t + trace.records[t - 1].d_t) -
            trace.records[t].d_t;
    return trace;
}

}  // namespace

Trace run_interpolation(const GaussianDist& p0, const PotentialSpec& spec,
                        const Certificate& cert, int steps) {
    return run_interpolation_gaussian(p0, spec, cert, steps);
}

Trace run_interpolation(const GridDist& p0, const PotentialSpec& spec,
                        const Certificate& cert, int steps) {
    return run_interpolation_grid(p0, spec, cert, steps);
}

EntropyBoundReport entropy_bound_check(const Trace& trace, const Certificate& cert) {
    if (trace.records.size() < 2)
        throw DimensionMismatch("entropy_bound_check needs a trace with at least two steps");
    EntropyBoundReport r;
    r.d0 = trace.records[0].d_t;
    r.d1 = trace.records[1].d_t;
    const double f = (1.0 - cert.delta) * (1.0 - cert.delta);
    r.lhs = trace.d_initial;
    r.rhs = (0.5 * f * r.d0 + r.d1) / (1.0 - f);
    r.slack = r.rhs - r.lhs;
    r.d0_bound_slack = trace.fisher_initial / (2.0 * cert.rho) - r.d0;
    r.d1_bound_slack = (1.0 + 0.25 * f) / cert.rho * trace.fisher_initial - r.d1;
    double dsum = 0.0;
    for (std::size_t t = 1; t < trace.records.size(); ++t) dsum += trace.records[t].d_t;
    r.aux_partial_slack = dsum + trace.d_final - trace.d_initial;
    return r;
}

}  // namespace lsi
