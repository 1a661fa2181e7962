#include "lsi/toyprocess.hpp"

#include <cmath>

#include "lsi/grid.hpp"
#include "lsi/kernels.hpp"

namespace lsi {

void ToyProcessSpec::validate() const {
    if (n < 1 || n > 3) throw CapacityExceeded("toy process needs n in [1, 3]");
    if (alphabet < 2 || alphabet > 4) throw CapacityExceeded("toy alphabet in [2, 4]");
    if (horizon < 1 || horizon > 3) throw CapacityExceeded("toy horizon in [1, 3]");
    std::int64_t jsize = 1;
    for (int k = 0; k < n * (horizon + 1); ++k) jsize *= alphabet;
    if (static_cast<std::int64_t>(joint.size()) != jsize)
        throw DimensionMismatch("toy joint tensor has the wrong size");
    std::int64_t tsize = 1;
    for (int k = 0; k < n; ++k) tsize *= alphabet;
    if (static_cast<std::int64_t>(target.size()) != tsize)
        throw DimensionMismatch("toy target tensor has the wrong size");
    double js = 0.0, ts = 0.0;
    for (double v : joint) {
        if (!(v >= 0.0)) throw NotNormalizable("toy joint must be nonnegative");
        js += v;
    }
    for (double v : target) {
        if (!(v > 0.0)) throw NotNormalizable("toy target must be strictly positive");
        ts += v;
    }
    if (std::abs(js - 1.0) > 1e-9 || std::abs(ts - 1.0) > 1e-9)
        throw NotNormalizable("toy laws must be normalized");
}

namespace {

double discrete_kl(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c)
        if (p[c] > 0.0) acc += p[c] * std::log(p[c] / q[c]);
    return acc;
}

}  // namespace

std::vector<double> aux_theorem_bruteforce(const ToyProcessSpec& toy) {
    toy.validate();
    const int n = toy.n;
    const int a = toy.alphabet;
    const int s = toy.horizon;
    const int nt = n * (s + 1);
    const std::vector<int> full_dims(nt, a);
    const std::vector<int> block_dims(n, a);
    const std::vector<int> pair_dims(2 * n, a);

    // target conditional tables along each site
    std::vector<std::vector<double>> qtabs(n);
    for (int i = 0; i < n; ++i) {
        qtabs[i] = toy.target;
        const auto strides = row_major_strides(block_dims);
        const std::int64_t cols = static_cast<std::int64_t>(toy.target.size()) / a;
        std::vector<int> rdims;
        std::vector<std::int64_t> rstrides;
        for (int d = 0; d < n; ++d)
            if (d != i) {
                rdims.push_back(a);
                rstrides.push_back(strides[d]);
            }
        for (std::int64_t col = 0; col < cols; ++col) {
            std::int64_t base = 0;
            std::int64_t rest = col;
            for (int d = static_cast<int>(rdims.size()) - 1; d >= 0; --d) {
                base += (rest % rdims[d]) * rstrides[d];
                rest /= rdims[d];
            }
            double mass = 0.0;
            for (int j = 0; j < a; ++j) mass += qtabs[i][base + j * strides[i]];
            for (int j = 0; j < a; ++j) qtabs[i][base + j * strides[i]] /= mass;
        }
    }

    auto block_marginal = [&](int t) {  // dist(Y(t)), t in 1..s+1
        std::vector<bool> keep(nt, false);
        for (int k = 0; k < n; ++k) keep[(t - 1) * n + k] = true;
        return kernels::marginalize_serial(toy.joint, full_dims, keep);
    };
    auto pair_marginal = [&](int t) {  // dist(Y(t), Y(t+1))
        std::vector<bool> keep(nt, false);
        for (int k = 0; k < 2 * n; ++k) keep[(t - 1) * n + k] = true;
        return kernels::marginalize_serial(toy.joint, full_dims, keep);
    };

    const double lhs = discrete_kl(block_marginal(1), toy.target);

    std::vector<double> slack(s);
    double dsum = 0.0;
    for (int t = 1; t <= s; ++t) {
        const auto pair = pair_marginal(t);
        for (int i = 0; i < n; ++i) {
            std::vector<bool> keep(2 * n, false);
            for (int k = 0; k <= i; ++k) keep[k] = true;
            for (int k = i + 1; k < n; ++k) keep[n + k] = true;
            const auto window = kernels::marginalize_serial(pair, pair_dims, keep);
            dsum += kernels::column_kl_serial(window, block_dims, i, qtabs[i]);
        }
        const double tail = discrete_kl(block_marginal(t + 1), toy.target);
        slack[t - 1] = dsum + tail - lhs;
    }
    return slack;
}

ToyProcessSpec random_toy_process(int n, int alphabet, int horizon, std::mt19937_64& rng) {
    ToyProcessSpec toy;
    toy.n = n;
    toy.alphabet = alphabet;
    toy.horizon = horizon;
    std::int64_t jsize = 1;
    for (int k = 0; k < n * (horizon + 1); ++k) jsize *= alphabet;
    std::int64_t tsize = 1;
    for (int k = 0; k < n; ++k) tsize *= alphabet;

    std::uniform_real_distribution<double> u(0.05, 1.0);
    toy.joint.resize(jsize);
    double js = 0.0;
    for (auto& v : toy.joint) js += (v = u(rng));
    for (auto& v : toy.joint) v /= js;
    toy.target.resize(tsize);
    double ts = 0.0;
    for (auto& v : toy.target) ts += (v = u(rng));
    for (auto& v : toy.target) v /= ts;
    return toy;
}

}  // namespace lsi
