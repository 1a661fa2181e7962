#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lsi {

// Weighted point cloud; rows of points are atom locations.
struct DiscreteCloud {
    Eigen::MatrixXd points;  // natoms x dim
    std::vector<double> mass;
};

constexpr int kMaxTransportAtoms = 4096;  // combined support cap for the exact solver

// Exact squared-Euclidean transport cost (min over couplings of
// sum pi_ij |x_i - y_j|^2) by successive shortest augmenting paths with
// node potentials on the dense bipartite graph.
double exact_transport_cost(const DiscreteCloud& a, const DiscreteCloud& b);

struct SinkhornResult {
    double cost = 0.0;
    int iterations = 0;
    double marginal_error = 0.0;
    double epsilon = 0.0;
};

// Entropic-regularization fast path (log-domain); returns a biased cost.
SinkhornResult sinkhorn_transport_cost(const DiscreteCloud& a, const DiscreteCloud& b,
                                       double epsilon, int max_iter = 2000,
                                       double tol = 1e-9);

}  // namespace lsi
