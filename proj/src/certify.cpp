#include "lsi/certify.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "lsi/gaussian.hpp"

namespace lsi {

ContractivityMatrices bound_matrices(const PotentialSpec& spec) {
    if (spec.variant != Variant::Quadratic && spec.variant != Variant::PerturbedQuadratic)
        throw NoDecomposition("unsupported variant");
    const int n = spec.n;
    ContractivityMatrices m;
    m.a1 = Eigen::MatrixXd::Zero(n, n);
    m.a2 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            if (i == k) continue;
            const double a = std::abs(spec.precision(i, k));
            if (i < k)
                m.a1(i, k) = a;
            else
                m.a2(i, k) = a;
        }
    return m;
}

SpectralNorm spectral_norm(const Eigen::MatrixXd& a) {
    SpectralNorm out;
    out.frobenius = a.norm();
    const int n = static_cast<int>(std::max(a.rows(), a.cols()));
    if (out.frobenius == 0.0) return out;

    // |A^T A x_k| with normalized iterates is nondecreasing and bounded by
    // the top eigenvalue, so a stalled successive difference means either
    // convergence or a cluster whose width already bounds the error.
    const Eigen::MatrixXd ata = a.transpose() * a;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(a.cols());
    x /= x.norm();
    double prev = 0.0;
    const int cap = 10 * n;
    for (int it = 1; it <= cap; ++it) {
        Eigen::VectorXd y = ata * x;
        const double lambda = y.norm();
        out.iterations = it;
        if (lambda == 0.0) {
            // seed landed in the kernel; restart off-axis
            x = Eigen::VectorXd::Zero(a.cols());
            x(it % a.cols()) = 1.0;
            continue;
        }
        x = y / lambda;
        const double sigma = std::sqrt(lambda);
        if (it > 1 && std::abs(sigma - prev) <= 1e-10 * sigma) {
            out.value = sigma;
            return out;
        }
        prev = sigma;
    }
    out.converged = false;
    out.value = out.frobenius;
    return out;
}

Certificate certify(const PotentialSpec& spec) {
    const ContractivityMatrices m = bound_matrices(spec);
    const SpectralNorm n1 = spectral_norm(m.a1);
    const SpectralNorm n2 = spectral_norm(m.a2);

    Certificate c;
    c.rho = spec_rho(spec);
    c.norm_a1 = n1.value;
    c.norm_a2 = n2.value;
    c.norms_converged = n1.converged && n2.converged;
    const double amax = std::max(c.norm_a1, c.norm_a2);
    c.delta = 1.0 - 2.0 * amax / c.rho;
    c.alt_denominator = c.rho - 2.0 * amax;
    c.pass = c.delta > 0.0;
    if (c.pass) {
        c.lsi_lower = c.rho * c.delta / 2.0;
        c.lipschitz_bound = (1.0 - c.delta) / c.delta;
    }
    return c;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string certificate_to_json(const Certificate& cert) {
    std::ostringstream out;
    out << "{\n"
        << "  \"rho\": " << fmt(cert.rho) << ",\n"
        << "  \"norm_a1\": " << fmt(cert.norm_a1) << ",\n"
        << "  \"norm_a2\": " << fmt(cert.norm_a2) << ",\n"
        << "  \"delta\": " << fmt(cert.delta) << ",\n"
        << "  \"lsi_lower\": " << (cert.lsi_lower ? fmt(*cert.lsi_lower) : "null") << ",\n"
        << "  \"alt_denominator\": " << fmt(cert.alt_denominator) << ",\n"
        << "  \"lipschitz_bound\": "
        << (cert.lipschitz_bound ? fmt(*cert.lipschitz_bound) : "null") << ",\n"
        << "  \"pass\": " << (cert.pass ? "true" : "false") << "\n"
        << "}";
    return out.str();
}

LipschitzReport lipschitz_check(const PotentialSpec& spec, const Certificate& cert,
                                int i, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& xhat) {
    if (spec.variant != Variant::Quadratic)
        throw NoDecomposition("lipschitz_check needs the quadratic variant");
    if (!cert.pass) throw NotPositiveDefinite("lipschitz_check needs a certified spec");
    if (i < 1 || i >= spec.n) throw DimensionMismatch("prefix length must be in [1, n-1]");
    if (x.size() != i || xhat.size() != i)
        throw DimensionMismatch("prefix vectors must have length i");

    // dist(X_{i+1..n} | X_{1..i} = x) = N(-Mbb^-1 Mba x, Mbb^-1); the two
    // conditionals share a covariance, so W2 is the mean gap.
    const int nb = spec.n - i;
    const Eigen::MatrixXd mbb = spec.precision.bottomRightCorner(nb, nb);
    const Eigen::MatrixXd mba = spec.precision.bottomLeftCorner(nb, i);
    const Eigen::VectorXd gap = Eigen::LLT<Eigen::MatrixXd>(mbb).solve(mba * (x - xhat));

    LipschitzReport r;
    r.w2 = gap.norm();
    r.prefix_distance = (x - xhat).norm();
    r.ratio = r.prefix_distance > 0.0 ? r.w2 / r.prefix_distance : 0.0;
    r.bound = *cert.lipschitz_bound;
    r.pass = r.ratio <= r.bound + 1e-12;
    return r;
}

}  // namespace lsi
