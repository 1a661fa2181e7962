#include "lsi/gaussian.hpp"

#include <cmath>

#include "lsi/errors.hpp"

namespace lsi {

namespace {

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
    return out;
}

}  // namespace

Eigen::VectorXd sym_pseudo_solve(const Eigen::MatrixXd& s, const Eigen::VectorXd& b) {
    Eigen::MatrixXd bm = b;
    return sym_pseudo_solve(s, bm).col(0);
}

Eigen::MatrixXd sym_pseudo_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& b) {
    if (s.rows() == 0) return Eigen::MatrixXd(0, b.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1.0) * 1e-13;
    Eigen::VectorXd inv(ev.size());
    for (int i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * b;
}

GaussianDist gaussian_marginal(const GaussianDist& g, const std::vector<int>& keep) {
    GaussianDist out;
    out.mean = subvector(g.mean, keep);
    out.cov = submatrix(g.cov, keep, keep);
    return out;
}

ScalarConditional gaussian_conditional_scalar(const GaussianDist& g, int target,
                                              const std::vector<int>& window) {
    ScalarConditional c;
    if (window.empty()) {
        c.alpha0 = g.mean(target);
        c.alpha = Eigen::VectorXd(0);
        c.var = g.cov(target, target);
        return c;
    }
    Eigen::MatrixXd sww = submatrix(g.cov, window, window);
    Eigen::VectorXd swt(window.size());
    for (std::size_t k = 0; k < window.size(); ++k) swt(k) = g.cov(window[k], target);
    c.alpha = sym_pseudo_solve(sww, swt);
    c.alpha0 = g.mean(target) - c.alpha.dot(subvector(g.mean, window));
    c.var = std::max(0.0, g.cov(target, target) - c.alpha.dot(swt));
    return c;
}

BlockConditional gaussian_conditional_block(const GaussianDist& g,
                                            const std::vector<int>& target,
                                            const std::vector<int>& given) {
    BlockConditional c;
    Eigen::MatrixXd saa = submatrix(g.cov, given, given);
    Eigen::MatrixXd sab = submatrix(g.cov, given, target);
    c.coeff = sym_pseudo_solve(saa, sab).transpose();
    c.offset = subvector(g.mean, target) - c.coeff * subvector(g.mean, given);
    c.cov = submatrix(g.cov, target, target) - c.coeff * sab;
    c.cov = 0.5 * (c.cov + c.cov.transpose());
    return c;
}

void gaussian_append_affine(GaussianDist& g, const std::vector<int>& idx,
                            const Eigen::VectorXd& coeff, double c0, double noise_var) {
    const int d = g.dim();
    Eigen::VectorXd cross = Eigen::VectorXd::Zero(d);
    double self = noise_var;
    double mu = c0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        mu += coeff(k) * g.mean(idx[k]);
        for (int j = 0; j < d; ++j) cross(j) += coeff(k) * g.cov(idx[k], j);
    }
    for (std::size_t k = 0; k < idx.size(); ++k) self += coeff(k) * cross(idx[k]);

    g.mean.conservativeResize(d + 1);
    g.mean(d) = mu;
    g.cov.conservativeResize(d + 1, d + 1);
    g.cov.block(0, d, d, 1) = cross;
    g.cov.block(d, 0, 1, d) = cross.transpose();
    g.cov(d, d) = self;
}

void gaussian_append_affine_block(GaussianDist& g, const std::vector<int>& idx,
                                  const Eigen::MatrixXd& coeff,
                                  const Eigen::VectorXd& offset,
                                  const Eigen::MatrixXd& noise_cov) {
    const int d = g.dim();
    const int b = static_cast<int>(coeff.rows());
    Eigen::MatrixXd cov_sub(idx.size(), d);
    for (std::size_t k = 0; k < idx.size(); ++k) cov_sub.row(k) = g.cov.row(idx[k]);
    Eigen::MatrixXd cross = coeff * cov_sub;  // b x d
    Eigen::MatrixXd cross_idx(b, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) cross_idx.col(k) = cross.col(idx[k]);
    Eigen::MatrixXd self = cross_idx * coeff.transpose() + noise_cov;
    Eigen::VectorXd mu = offset + coeff * subvector(g.mean, idx);

    g.mean.conservativeResize(d + b);
    g.mean.tail(b) = mu;
    g.cov.conservativeResize(d + b, d + b);
    g.cov.block(0, d, d, b) = cross.transpose();
    g.cov.block(d, 0, b, d) = cross;
    g.cov.block(d, d, b, b) = 0.5 * (self + self.transpose());
}

double kl_gaussian(const GaussianDist& p, const GaussianDist& q) {
    if (p.dim() != q.dim()) throw DimensionMismatch("kl: dimension mismatch");
    const int n = p.dim();
    Eigen::LLT<Eigen::MatrixXd> lq(q.cov);
    Eigen::LLT<Eigen::MatrixXd> lp(p.cov);
    if (lq.info() != Eigen::Success || lp.info() != Eigen::Success)
        throw NotPositiveDefinite("kl: covariance not positive definite");
    const Eigen::MatrixXd qi_p = lq.solve(p.cov);
    const Eigen::VectorXd dm = q.mean - p.mean;
    double logdet_q = 0.0, logdet_p = 0.0;
    for (int i = 0; i < n; ++i) {
        logdet_q += 2.0 * std::log(lq.matrixL()(i, i));
        logdet_p += 2.0 * std::log(lp.matrixL()(i, i));
    }
    return 0.5 * (qi_p.trace() - n + dm.dot(lq.solve(dm)) + logdet_q - logdet_p);
}

// E_p |grad log(p/q)|^2 = tr(A^T A cov_p) + |b|^2 with
// A = cov_q^-1 - cov_p^-1 and b = cov_q^-1 (mean_p - mean_q).
double fisher_gaussian(const GaussianDist& p, const GaussianDist& q) {
    if (p.dim() != q.dim()) throw DimensionMismatch("fisher: dimension mismatch");
    const int n = p.dim();
    Eigen::LLT<Eigen::MatrixXd> lq(q.cov);
    Eigen::LLT<Eigen::MatrixXd> lp(p.cov);
    if (lq.info() != Eigen::Success || lp.info() != Eigen::Success)
        throw NotPositiveDefinite("fisher: covariance not positive definite");
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a = lq.solve(id) - lp.solve(id);
    const Eigen::VectorXd b = lq.solve(p.mean - q.mean);
    return (a.transpose() * a * p.cov).trace() + b.squaredNorm();
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-14);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Bures term in the Procrustes form min_U |sqrt(cov_p) - sqrt(cov_q) U|_F,
// which avoids the cancellation of the trace form when the covariances
// nearly coincide.
double w2_gaussian(const GaussianDist& p, const GaussianDist& q) {
    if (p.dim() != q.dim()) throw DimensionMismatch("w2: dimension mismatch");
    const Eigen::MatrixXd a = spd_sqrt(p.cov);
    const Eigen::MatrixXd b = spd_sqrt(q.cov);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b * a,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd u = svd.matrixU() * svd.matrixV().transpose();
    const double bures2 = (a - b * u).squaredNorm();
    return std::sqrt((p.mean - q.mean).squaredNorm() + bures2);
}

double lambda_min_sym(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().minCoeff();
}

}  // namespace lsi
