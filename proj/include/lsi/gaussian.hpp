#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lsi {

struct GaussianDist {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    int dim() const { return static_cast<int>(mean.size()); }
};

// dist(x_target | x_window = w) = N(alpha0 + alpha . w, var)
struct ScalarConditional {
    double alpha0 = 0.0;
    Eigen::VectorXd alpha;
    double var = 0.0;
};

// dist(x_target | x_given = a) = N(offset + coeff a, cov)
struct BlockConditional {
    Eigen::MatrixXd coeff;
    Eigen::VectorXd offset;
    Eigen::MatrixXd cov;
};

GaussianDist gaussian_marginal(const GaussianDist& g, const std::vector<int>& keep);

ScalarConditional gaussian_conditional_scalar(const GaussianDist& g, int target,
                                              const std::vector<int>& window);

BlockConditional gaussian_conditional_block(const GaussianDist& g,
                                            const std::vector<int>& target,
                                            const std::vector<int>& given);

// Append coordinate z = c0 + coeff . x_idx + N(0, noise_var).
void gaussian_append_affine(GaussianDist& g, const std::vector<int>& idx,
                            const Eigen::VectorXd& coeff, double c0, double noise_var);

// Append block z = offset + coeff x_idx + N(0, noise_cov).
void gaussian_append_affine_block(GaussianDist& g, const std::vector<int>& idx,
                                  const Eigen::MatrixXd& coeff,
                                  const Eigen::VectorXd& offset,
                                  const Eigen::MatrixXd& noise_cov);

double kl_gaussian(const GaussianDist& p, const GaussianDist& q);
double fisher_gaussian(const GaussianDist& p, const GaussianDist& q);
double w2_gaussian(const GaussianDist& p, const GaussianDist& q);

// Symmetric PSD square root via eigendecomposition, eigenvalues floored at 1e-14.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& s);

double lambda_min_sym(const Eigen::MatrixXd& m);

// Least-squares solve of s x = b for symmetric PSD s (eigenvalue cutoff,
// deterministic); used for conditioning on possibly degenerate windows.
Eigen::VectorXd sym_pseudo_solve(const Eigen::MatrixXd& s, const Eigen::VectorXd& b);
Eigen::MatrixXd sym_pseudo_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& b);

}  // namespace lsi
