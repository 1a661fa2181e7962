#pragma once

#include <Eigen/Dense>
#include <optional>

#include "lsi/model.hpp"

namespace lsi {

// Triangular bounds alpha_ik = sup_x |d^2 V / dx_i dx_k|: a1 holds the
// strictly upper triangle (i < k), a2 the strictly lower one.
struct ContractivityMatrices {
    Eigen::MatrixXd a1;
    Eigen::MatrixXd a2;
};

ContractivityMatrices bound_matrices(const PotentialSpec& spec);

struct SpectralNorm {
    double value = 0.0;      // largest singular value (or fallback)
    double frobenius = 0.0;  // certified upper bound
    bool converged = true;
    int iterations = 0;
};

// Power iteration on A^T A, all-ones seed, relative tolerance 1e-10, capped
// at 10 n iterations; on no convergence the Frobenius bound is returned.
SpectralNorm spectral_norm(const Eigen::MatrixXd& a);

struct Certificate {
    double rho = 0.0;
    double norm_a1 = 0.0;
    double norm_a2 = 0.0;
    double delta = 0.0;
    std::optional<double> lsi_lower;        // rho * delta / 2 when certified
    double alt_denominator = 0.0;           // rho - 2 max(norm_a1, norm_a2)
    std::optional<double> lipschitz_bound;  // (1 - delta) / delta when certified
    bool pass = false;
    bool norms_converged = true;
};

Certificate certify(const PotentialSpec& spec);

// Certificate as a JSON object, floats at 17 significant digits.
std::string certificate_to_json(const Certificate& cert);

struct LipschitzReport {
    double w2 = 0.0;
    double prefix_distance = 0.0;
    double ratio = 0.0;
    double bound = 0.0;
    bool pass = true;
};

// W2 between the Gaussian conditionals of the suffix given two prefixes of
// length i, against the certified Lipschitz constant.
LipschitzReport lipschitz_check(const PotentialSpec& spec, const Certificate& cert,
                                int i, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& xhat);

}  // namespace lsi
