#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "lsi/errors.hpp"

namespace lsi {

enum class Variant { Quadratic, PerturbedQuadratic };

// Bounded smooth 1-D perturbation phi(x) = a sin(omega x); the declared
// bounds sup|phi|, sup|phi'|, sup|phi''| are exact for this family.
struct Perturbation {
    double a = 0.0;
    double omega = 0.0;

    double value(double x) const { return a * std::sin(omega * x); }
    double deriv(double x) const { return a * omega * std::cos(omega * x); }
    double sup_phi() const { return std::abs(a); }
    double sup_dphi() const { return std::abs(a * omega); }
    double sup_ddphi() const { return std::abs(a * omega * omega); }
    bool zero() const { return a == 0.0; }
};

// Hamiltonian V(x) = 1/2 x^T M x (+ sum_i phi_i(x_i) for the perturbed
// variant). Lattice models expand to the quadratic variant on load.
struct PotentialSpec {
    Variant variant = Variant::Quadratic;
    Eigen::MatrixXd precision;
    std::vector<Perturbation> phi;  // size n for PerturbedQuadratic, empty otherwise
    int n = 0;

    bool has_perturbations() const { return variant == Variant::PerturbedQuadratic; }
};

PotentialSpec make_quadratic(const Eigen::MatrixXd& m);
PotentialSpec make_perturbed(const Eigen::MatrixXd& m, std::vector<Perturbation> phi);

// Nearest-neighbor lattice with lexicographic node order: M_ii = h,
// M_ik = J when nodes i,k differ by one step in one lattice direction.
PotentialSpec build_lattice(const std::vector<int>& dims, double j_coupling, double h);

double potential_value(const PotentialSpec& spec, const Eigen::VectorXd& x);
Eigen::VectorXd grad_potential(const PotentialSpec& spec, const Eigen::VectorXd& x);

// d^2 V / dx_i dx_k for i != k; constant in x for the supported variants.
double mixed_partial(const PotentialSpec& spec, int i, int k, const Eigen::VectorXd& x);

// Single-site conditional Q_i(. | xbar); Gaussian in closed form for the
// quadratic variant, otherwise carried as a 1-D log-density.
struct Conditional1D {
    int site = 0;
    bool gaussian = false;
    double mean = 0.0;
    double var = 0.0;
    std::function<double(double)> log_density;  // unnormalized, always set
};

Conditional1D conditional(const PotentialSpec& spec, int i, const Eigen::VectorXd& xbar);

// Lower bound on the LSI constant of every Q_i(. | xbar), uniform in xbar:
// M_ii for the quadratic variant, M_ii exp(-4 sup|phi_i|) with perturbation.
double conditional_lsi_rho(const PotentialSpec& spec, int i);

// min over sites of conditional_lsi_rho.
double spec_rho(const PotentialSpec& spec);

// Strict JSON model file: variant tag, dense or sparse precision entries,
// perturbation list, or a lattice block. Unknown keys are rejected.
PotentialSpec model_from_json_text(const std::string& text);
PotentialSpec load_model(const std::string& path);
std::string model_to_json_text(const PotentialSpec& spec);

}  // namespace lsi
