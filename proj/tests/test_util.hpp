#pragma once

#include <Eigen/Dense>
#include <random>

#include "lsi/certify.hpp"
#include "lsi/gaussian.hpp"
#include "lsi/grid.hpp"
#include "lsi/model.hpp"

namespace lsitest {

inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) a(i, k) = g(rng);
    return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

inline Eigen::MatrixXd random_spd(int n, double lmin, double lmax, std::mt19937_64& rng) {
    const Eigen::MatrixXd q = random_orthogonal(n, rng);
    std::uniform_real_distribution<double> u(lmin, lmax);
    Eigen::VectorXd ev(n);
    for (int i = 0; i < n; ++i) ev(i) = u(rng);
    Eigen::MatrixXd m = q * ev.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose());
}

inline lsi::GaussianDist random_gaussian(int n, std::mt19937_64& rng,
                                         double mean_scale = 1.5, double lmin = 0.3,
                                         double lmax = 3.0) {
    lsi::GaussianDist g;
    std::uniform_real_distribution<double> u(-mean_scale, mean_scale);
    g.mean.resize(n);
    for (int i = 0; i < n; ++i) g.mean(i) = u(rng);
    g.cov = random_spd(n, lmin, lmax, rng);
    return g;
}

// Banded symmetric precision matrix scaled so the contractivity condition
// holds with the requested delta (norms measured by a dense SVD, so the
// scaling is independent of the power iteration being tested).
inline Eigen::MatrixXd random_banded_certified(int n, int bandwidth, double target_delta,
                                               std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ud(0.5, 2.0);
    std::uniform_real_distribution<double> uo(-1.0, 1.0);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = ud(rng);
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k <= std::min(n - 1, i + bandwidth); ++k)
            m(i, k) = m(k, i) = uo(rng);

    double rho = m.diagonal().minCoeff();
    Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k) a1(i, k) = std::abs(m(i, k));
    const double norm = a1.jacobiSvd().singularValues()(0);
    if (norm > 0.0) {
        const double scale = 0.5 * rho * (1.0 - target_delta) / norm;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                if (i != k) m(i, k) *= scale;
    }
    return m;
}

// Draws banded specs until the certifier accepts one; the power iteration's
// Frobenius fallback keeps some otherwise-fine draws out, which is the
// certifier being conservative, not a generator bug.
inline lsi::PotentialSpec random_certified_quadratic(int n, int bandwidth,
                                                     double target_delta,
                                                     std::mt19937_64& rng) {
    for (int tries = 0; tries < 200; ++tries) {
        const Eigen::MatrixXd m = random_banded_certified(n, bandwidth, target_delta, rng);
        lsi::PotentialSpec spec = lsi::make_quadratic(m);
        if (lsi::certify(spec).pass) return spec;
    }
    throw std::runtime_error("could not draw a certified spec");
}

inline lsi::GridDist random_grid(const std::vector<lsi::GridAxis>& axes,
                                 std::mt19937_64& rng, double floor = 0.02) {
    lsi::GridDist g;
    g.axes = axes;
    g.w.resize(g.size());
    std::uniform_real_distribution<double> u(floor, 1.0);
    for (auto& v : g.w) v = u(rng);
    g.normalize();
    return g;
}

}  // namespace lsitest
