#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lsi/certify.hpp"
#include "lsi/gaussian.hpp"
#include "lsi/grid.hpp"
#include "lsi/metrics.hpp"
#include "lsi/model.hpp"

namespace lsi {

struct NotCertified : std::domain_error {
    using std::domain_error::domain_error;
};

// Joint law of two configuration vectors on a shared grid; tensor dims are
// (first block, second block), row-major, 2n axes of the same per-coordinate
// grid.
struct GridPairLaw {
    std::vector<GridAxis> axes;
    std::vector<double> w;

    int n() const { return static_cast<int>(axes.size()); }
    std::vector<int> dims() const;
    std::int64_t block_size() const;
};

// As GridPairLaw over three configuration vectors (first, second, eta).
struct GridTripleLaw {
    std::vector<GridAxis> axes;
    std::vector<double> w;

    int n() const { return static_cast<int>(axes.size()); }
    std::vector<int> dims() const;
};

// Gaussian pair laws are a GaussianDist on 2n coords, first block at [0, n).
struct PairLaw {
    int n = 0;
    std::variant<GaussianDist, GridPairLaw> law;
};

// Gaussian triple laws: [first | second | eta] on 3n coords.
struct TripleLaw {
    int n = 0;
    std::variant<GaussianDist, GridTripleLaw> law;
};

PairLaw make_gaussian_pair(const GaussianDist& joint);
PairLaw make_grid_pair(GridPairLaw law);

// Push-forward under the sweep operator G(v|u) = prod_i Q_i(v_i | v^{i-1}, u_i^n).
GaussianDist markov_step_g(const GaussianDist& law, const PotentialSpec& spec);
GridDist markov_step_g(const GridDist& law, const PotentialSpec& spec);

struct ContractionReport {
    double w2_before = 0.0;
    double w2_after = 0.0;
    double bound = 0.0;  // (1-delta)^2 W2(sigma, pi)^2
    double slack = 0.0;  // bound - W2(sigma G, pi G)^2
};

ContractionReport contraction_check(const PotentialSpec& spec, const Certificate& cert,
                                    const GaussianDist& sigma, const GaussianDist& pi);
ContractionReport contraction_check(const PotentialSpec& spec, const Certificate& cert,
                                    const GridDist& sigma, const GridDist& pi);

template <class Dist>
struct FixedPointResult {
    Dist dist;
    int iterations = 0;
    double last_step_w2 = 0.0;
    int cap = 0;
    bool hit_cap = false;
};

FixedPointResult<GaussianDist> fixed_point(const PotentialSpec& spec,
                                           const Certificate& cert,
                                           const GaussianDist& init, double tol);
FixedPointResult<GridDist> fixed_point(const PotentialSpec& spec, const Certificate& cert,
                                       const GridDist& init, double tol);

// Copy with the same windows dist(Y^i, S_i^n) satisfying the Markov
// relations Y_i -> (Y^{i-1}, S_i^n) -> S^i.
PairLaw loosely_connected_copy(const PairLaw& joint);

// Extends a loosely connected pair with eta: dist(eta_i | Y^{i-1}, S_i^n) is
// Q_i, joined with Y_i by the monotone coupling per condition cell.
TripleLaw q_extension(const PairLaw& joint, const PotentialSpec& spec);

struct TraceRecord {
    int t = 0;
    double d_t = 0.0;
    double recursion_slack = 0.0;  // NaN for t < 2
    double w2_skip2_bound = 0.0;   // E|Y(t-2) - eta(t)|^2, NaN for t < 2
};

struct Trace {
    std::vector<TraceRecord> records;  // t = 0..T
    Certificate certificate;
    std::string backend;
    double d_initial = 0.0;      // D(p0 || q) = D(Y(1) || X)
    double fisher_initial = 0.0; // I(p0 || q)
    double d_final = 0.0;        // D(Y(T+1) || X)
    double marginal_consistency = 0.0;  // max gap dist(Y(t)) vs dist(eta(t))
    // run metadata
    std::uint64_t seed = 0;   // reproducibility stamp set by the caller
    int grid_points = 0;      // grid backend only
    double box_lo = 0.0;
    double box_hi = 0.0;
};

// Interpolation run: initializes dist(Y(0), Y(1)) as the loosely connected
// copy of the diagonal coupling of (p0, p0) and advances by alternating the
// extension and the copy, recording D_t, the two-step recursion slack and
// the skip-two Wasserstein bound.
Trace run_interpolation(const GaussianDist& p0, const PotentialSpec& spec,
                        const Certificate& cert, int steps);
Trace run_interpolation(const GridDist& p0, const PotentialSpec& spec,
                        const Certificate& cert, int steps);

struct EntropyBoundReport {
    double lhs = 0.0;  // D(Y(1) || X)
    double rhs = 0.0;  // (1/2 (1-delta)^2 D0 + D1) / (1 - (1-delta)^2)
    double slack = 0.0;
    double d0 = 0.0;
    double d1 = 0.0;
    double d0_bound_slack = 0.0;  // (1/2rho) I - D0
    double d1_bound_slack = 0.0;  // (1/rho)(1 + 1/4 (1-delta)^2) I - D1
    double aux_partial_slack = 0.0;  // sum_{t>=1} D_t + D(Y(T+1)||X) - D(Y(1)||X)
};

EntropyBoundReport entropy_bound_check(const Trace& trace, const Certificate& cert);

}  // namespace lsi
