#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "lsi/gridops.hpp"
#include "lsi/kernels.hpp"
#include "lsi/model.hpp"
#include "test_util.hpp"

using namespace lsi;

namespace {

struct ThreadGuard {
    ThreadGuard(int t) { kernels::set_threads(t); }
    ~ThreadGuard() { kernels::set_threads(1); }
};

}  // namespace

TEST_CASE("kl and fisher kernels: parallel matches the serial reference") {
    ThreadGuard guard(4);
    std::mt19937_64 rng(31);
    const auto axes = box_axes(3, 6.0, 12);
    const auto p = lsitest::random_grid(axes, rng);
    const auto q = lsitest::random_grid(axes, rng);

    const auto ks = kernels::kl_cells_serial(p.w, q.w);
    const auto kp = kernels::kl_cells(p.w, q.w);
    CHECK(ks.infinite == kp.infinite);
    CHECK(kp.value == doctest::Approx(ks.value).epsilon(1e-13));

    const auto fs = kernels::fisher_cells_serial(p, q);
    const auto fp = kernels::fisher_cells(p, q);
    CHECK(fp.value == doctest::Approx(fs.value).epsilon(1e-13));
}

TEST_CASE("fisher kernel: empty neighbors fall back to one-sided differences") {
    ThreadGuard guard(2);
    GridDist p, q;
    p.axes = q.axes = box_axes(1, 2.0, 8);
    p.w = {0.0, 0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0};
    q.w = {0.1, 0.2, 0.2, 0.2, 0.1, 0.1, 0.05, 0.05};
    const auto s = kernels::fisher_cells_serial(p, q);
    const auto r = kernels::fisher_cells(p, q);
    CHECK_FALSE(s.infinite);
    CHECK(r.value == doctest::Approx(s.value).epsilon(1e-13));
}

TEST_CASE("sweep kernel: parallel matches serial and preserves mass") {
    ThreadGuard guard(4);
    std::mt19937_64 rng(32);
    const auto spec = build_lattice({3}, 0.2, 1.0);
    const auto axes = box_axes(3, 6.0, 10);
    const auto p = lsitest::random_grid(axes, rng);
    const std::vector<int> dims = {10, 10, 10};

    for (int s = 0; s < 3; ++s) {
        const auto qtab = conditional_table(spec, axes, s);
        auto a = p.w, b = p.w;
        kernels::sweep_site(a, dims, s, qtab);
        kernels::sweep_site_serial(b, dims, s, qtab);
        double gap = 0.0, mass = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) {
            gap = std::max(gap, std::abs(a[c] - b[c]));
            mass += a[c];
        }
        CHECK(gap <= 1e-15);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("column_kl kernel: parallel matches serial") {
    ThreadGuard guard(4);
    std::mt19937_64 rng(33);
    const auto spec = build_lattice({2}, 0.2, 1.0);
    const auto axes = box_axes(2, 6.0, 16);
    const auto p = lsitest::random_grid(axes, rng);
    const std::vector<int> dims = {16, 16};
    for (int s = 0; s < 2; ++s) {
        const auto qtab = conditional_table(spec, axes, s);
        const double a = kernels::column_kl(p.w, dims, s, qtab);
        const double b = kernels::column_kl_serial(p.w, dims, s, qtab);
        CHECK(a == doctest::Approx(b).epsilon(1e-13));
    }
}

TEST_CASE("marginalize kernel: parallel matches serial and sums correctly") {
    ThreadGuard guard(4);
    std::mt19937_64 rng(34);
    const std::vector<int> dims = {5, 4, 3, 6};
    std::vector<double> w(tensor_size(dims));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : w) v = u(rng);

    const std::vector<bool> keep = {true, false, true, false};
    const auto a = kernels::marginalize(w, dims, keep);
    const auto b = kernels::marginalize_serial(w, dims, keep);
    REQUIRE(a.size() == 15);
    double gap = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) gap = std::max(gap, std::abs(a[c] - b[c]));
    CHECK(gap <= 1e-15);

    // spot-check one output cell by direct summation
    double direct = 0.0;
    const auto strides = row_major_strides(dims);
    for (int d1 = 0; d1 < 4; ++d1)
        for (int d3 = 0; d3 < 6; ++d3)
            direct += w[2 * strides[0] + d1 * strides[1] + 1 * strides[2] + d3 * strides[3]];
    CHECK(a[2 * 3 + 1] == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("conditional_table columns are normalized grid conditionals") {
    const auto spec = build_lattice({2}, 0.2, 1.0);
    const auto axes = box_axes(2, 6.0, 12);
    for (int s = 0; s < 2; ++s) {
        const auto qtab = conditional_table(spec, axes, s);
        const std::vector<int> dims = {12, 12};
        const auto strides = row_major_strides(dims);
        for (int other = 0; other < 12; ++other) {
            double mass = 0.0;
            for (int j = 0; j < 12; ++j)
                mass += qtab[other * strides[1 - s] + j * strides[s]];
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    // column ratios follow the conditional density exactly
    const auto qtab = conditional_table(spec, axes, 0);
    const auto c = conditional(spec, 0, Eigen::VectorXd::Constant(1, axes[1].center(3)));
    const double a0 = qtab[0 * 12 + 3];  // xi = center(0)
    const double a5 = qtab[5 * 12 + 3];  // xi = center(5)
    const double want =
        std::exp(c.log_density(axes[0].center(0)) - c.log_density(axes[0].center(5)));
    CHECK(a0 / a5 == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("threads configuration") {
    kernels::set_threads(3);
    CHECK(kernels::threads() == 3);
    kernels::set_threads(0);
    CHECK(kernels::threads() == 1);
}
