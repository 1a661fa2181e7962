#include "lsi/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsi/errors.hpp"

namespace lsi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
    Eigen::MatrixXd xa, xb;
    std::vector<double> a, b;
    int na = 0, nb = 0;

    double cost(int i, int j) const { return (xa.row(i) - xb.row(j)).squaredNorm(); }
};

Problem normalize(const DiscreteCloud& ca, const DiscreteCloud& cb) {
    if (ca.points.cols() != cb.points.cols())
        throw DimensionMismatch("transport: point dimensions differ");
    Problem p;
    double sa = 0.0, sb = 0.0;
    for (double m : ca.mass) sa += m;
    for (double m : cb.mass) sb += m;
    if (!(sa > 0.0) || !(sb > 0.0)) throw NotNormalizable("transport: empty cloud");

    std::vector<int> ia, ib;
    for (std::size_t i = 0; i < ca.mass.size(); ++i)
        if (ca.mass[i] > 0.0) ia.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < cb.mass.size(); ++j)
        if (cb.mass[j] > 0.0) ib.push_back(static_cast<int>(j));
    p.na = static_cast<int>(ia.size());
    p.nb = static_cast<int>(ib.size());
    p.xa.resize(p.na, ca.points.cols());
    p.xb.resize(p.nb, cb.points.cols());
    p.a.resize(p.na);
    p.b.resize(p.nb);
    for (int i = 0; i < p.na; ++i) {
        p.xa.row(i) = ca.points.row(ia[i]);
        p.a[i] = ca.mass[ia[i]] / sa;
    }
    for (int j = 0; j < p.nb; ++j) {
        p.xb.row(j) = cb.points.row(ib[j]);
        p.b[j] = cb.mass[ib[j]] / sb;
    }
    return p;
}

}  // namespace

double exact_transport_cost(const DiscreteCloud& ca, const DiscreteCloud& cb) {
    const Problem p = normalize(ca, cb);
    if (p.na + p.nb > kMaxTransportAtoms)
        throw SupportTooLarge("exact transport supports at most 4096 atoms in total");

    const int nv = p.na + p.nb;
    std::vector<double> pot(nv, 0.0), dist(nv), rem_a = p.a, rem_b = p.b;
    std::vector<int> parent(nv);
    std::vector<char> visited(nv);
    // flow entries per sink: (source, mass)
    std::vector<std::vector<std::pair<int, double>>> flow(p.nb);

    double remaining = 1.0;
    const int max_rounds = 20 * nv + 64;
    for (int round = 0; remaining > 1e-14; ++round) {
        if (round >= max_rounds)
            throw CapacityExceeded("transport solver exceeded its iteration cap");

        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(visited.begin(), visited.end(), 0);
        std::fill(parent.begin(), parent.end(), -1);
        for (int i = 0; i < p.na; ++i)
            if (rem_a[i] > 0.0) dist[i] = 0.0;

        // dense Dijkstra with reduced costs
        for (int iter = 0; iter < nv; ++iter) {
            int u = -1;
            double best = kInf;
            for (int w = 0; w < nv; ++w)
                if (!visited[w] && dist[w] < best) {
                    best = dist[w];
                    u = w;
                }
            if (u < 0) break;
            visited[u] = 1;
            if (u < p.na) {
                for (int j = 0; j < p.nb; ++j) {
                    const int w = p.na + j;
                    if (visited[w]) continue;
                    const double rc = p.cost(u, j) + pot[u] - pot[w];
                    if (dist[u] + rc < dist[w] - 1e-15) {
                        dist[w] = dist[u] + rc;
                        parent[w] = u;
                    }
                }
            } else {
                const int j = u - p.na;
                for (const auto& [i, f] : flow[j]) {
                    if (f <= 0.0 || visited[i]) continue;
                    const double rc = -p.cost(i, j) + pot[u] - pot[i];
                    if (dist[u] + rc < dist[i] - 1e-15) {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
            }
        }

        int target = -1;
        double dbest = kInf;
        for (int j = 0; j < p.nb; ++j)
            if (rem_b[j] > 0.0 && dist[p.na + j] < dbest) {
                dbest = dist[p.na + j];
                target = p.na + j;
            }
        if (target < 0) throw CapacityExceeded("transport solver found no augmenting path");

        for (int w = 0; w < nv; ++w) pot[w] += std::min(dist[w], dbest);

        // bottleneck along the augmenting path
        double push = rem_b[target - p.na];
        for (int w = target; parent[w] >= 0; w = parent[w]) {
            const int pw = parent[w];
            if (w >= p.na && pw < p.na) continue;  // forward arc, no cap
            if (w < p.na && pw >= p.na) {          // backward arc pw(sink) -> w(source)
                const int j = pw - p.na;
                for (const auto& [i, f] : flow[j])
                    if (i == w) push = std::min(push, f);
            }
        }
        {
            int w = target;
            while (parent[w] >= 0) w = parent[w];
            push = std::min(push, rem_a[w]);
        }

        for (int w = target; parent[w] >= 0; w = parent[w]) {
            const int pw = parent[w];
            if (pw < p.na && w >= p.na) {  // forward: add flow pw -> w
                const int j = w - p.na;
                bool found = false;
                for (auto& e : flow[j])
                    if (e.first == pw) {
                        e.second += push;
                        found = true;
                        break;
                    }
                if (!found) flow[j].emplace_back(pw, push);
            } else {  // backward: remove flow w -> pw
                const int j = pw - p.na;
                for (auto& e : flow[j])
                    if (e.first == w) {
                        e.second -= push;
                        break;
                    }
            }
        }
        {
            int w = target;
            while (parent[w] >= 0) w = parent[w];
            rem_a[w] -= push;
        }
        rem_b[target - p.na] -= push;
        remaining -= push;
    }

    double total = 0.0;
    for (int j = 0; j < p.nb; ++j)
        for (const auto& [i, f] : flow[j])
            if (f > 0.0) total += f * p.cost(i, j);
    return total;
}

SinkhornResult sinkhorn_transport_cost(const DiscreteCloud& ca, const DiscreteCloud& cb,
                                       double epsilon, int max_iter, double tol) {
    const Problem p = normalize(ca, cb);
    SinkhornResult out;
    out.epsilon = epsilon;

    Eigen::MatrixXd c(p.na, p.nb);
    for (int i = 0; i < p.na; ++i)
        for (int j = 0; j < p.nb; ++j) c(i, j) = p.cost(i, j);

    Eigen::VectorXd loga(p.na), logb(p.nb);
    for (int i = 0; i < p.na; ++i) loga(i) = std::log(p.a[i]);
    for (int j = 0; j < p.nb; ++j) logb(j) = std::log(p.b[j]);

    Eigen::VectorXd f = Eigen::VectorXd::Zero(p.na);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.nb);

    auto lse_rows = [&](Eigen::VectorXd& outv) {
        for (int i = 0; i < p.na; ++i) {
            double mx = -kInf;
            for (int j = 0; j < p.nb; ++j)
                mx = std::max(mx, (g(j) - c(i, j)) / epsilon + logb(j));
            double s = 0.0;
            for (int j = 0; j < p.nb; ++j)
                s += std::exp((g(j) - c(i, j)) / epsilon + logb(j) - mx);
            outv(i) = -epsilon * (mx + std::log(s));
        }
    };
    auto lse_cols = [&](Eigen::VectorXd& outv) {
        for (int j = 0; j < p.nb; ++j) {
            double mx = -kInf;
            for (int i = 0; i < p.na; ++i)
                mx = std::max(mx, (f(i) - c(i, j)) / epsilon + loga(i));
            double s = 0.0;
            for (int i = 0; i < p.na; ++i)
                s += std::exp((f(i) - c(i, j)) / epsilon + loga(i) - mx);
            outv(j) = -epsilon * (mx + std::log(s));
        }
    };

    for (int it = 1; it <= max_iter; ++it) {
        lse_rows(f);
        lse_cols(g);
        out.iterations = it;
        // row-marginal violation under the current plan
        double err = 0.0;
        for (int i = 0; i < p.na; ++i) {
            double row = 0.0;
            for (int j = 0; j < p.nb; ++j)
                row += std::exp((f(i) + g(j) - c(i, j)) / epsilon + loga(i) + logb(j));
            err = std::max(err, std::abs(row - p.a[i]));
        }
        out.marginal_error = err;
        if (err < tol) break;
    }

    double total = 0.0;
    for (int i = 0; i < p.na; ++i)
        for (int j = 0; j < p.nb; ++j)
            total += std::exp((f(i) + g(j) - c(i, j)) / epsilon + loga(i) + logb(j)) *
                     c(i, j);
    out.cost = total;
    return out;
}

}  // namespace lsi
