#pragma once

#include <vector>

#include "lsi/certify.hpp"
#include "lsi/gaussian.hpp"
#include "lsi/grid.hpp"
#include "lsi/model.hpp"

namespace lsi {

// Divergence value with an explicit infinity tag (absolute-continuity
// failures never surface as floating-point inf).
struct Divergence {
    double value = 0.0;
    bool infinite = false;
};

Divergence kl(const GaussianDist& p, const GaussianDist& q);
Divergence kl(const GridDist& p, const GridDist& q);

Divergence fisher(const GaussianDist& p, const GaussianDist& q);
Divergence fisher(const GridDist& p, const GridDist& q);

double w2(const GaussianDist& p, const GaussianDist& q);

enum class W2Method { Exact, Sinkhorn };

struct W2Result {
    double value = 0.0;
    bool exact = true;
};

// 1-D grids use the quantile coupling (exact); higher dimensions the exact
// transport LP, or the entropic fast path when requested.
W2Result w2(const GridDist& p, const GridDist& q, W2Method method = W2Method::Exact,
            double sinkhorn_epsilon = 0.0);

struct Coupling1D {
    GridDist source;
    GridDist target;
    struct Entry {
        int i = 0;
        int j = 0;
        double mass = 0.0;
    };
    std::vector<Entry> plan;

    double cost() const;
};

Coupling1D monotone_coupling_1d(const GridDist& p, const GridDist& q);

struct SlackReport {
    Divergence d;
    Divergence fisher_info;
    double w2_value = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    bool defined = true;  // false when a divergence came out infinite
};

// slack = I / (2 constant) - D
SlackReport check_lsi(const GaussianDist& p, const GaussianDist& q, double constant);
SlackReport check_lsi(const GridDist& p, const GridDist& q, double constant);

// slack = (2 / rho) D - W2^2
SlackReport check_otto_villani(const GaussianDist& p, const GaussianDist& q, double rho);
SlackReport check_otto_villani(const GridDist& p, const GridDist& q, double rho);

struct ScoreDisplacementReport {
    double value = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    bool halved = false;  // u1 == t1, so the halved bound applies as well
    double bound_halved = 0.0;
    double slack_halved = 0.0;
};

// Squared-gradient bound on the log ratio of shifted conditionals, evaluated
// through the mixed-partial closed forms of the supported variants.
ScoreDisplacementReport score_displacement_bound(const PotentialSpec& spec, const Eigen::VectorXd& u1,
                                   const Eigen::VectorXd& u2, const Eigen::VectorXd& t1,
                                   const Eigen::VectorXd& t2, const Eigen::VectorXd& zeta,
                                   const Certificate& cert);

}  // namespace lsi
