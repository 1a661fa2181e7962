// Benchmark comparing the serial reference kernels against the OpenMP
// variants on representative grid workloads.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "lsi/gridops.hpp"
#include "lsi/kernels.hpp"
#include "lsi/model.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-24s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
    if (threads > 0) lsi::kernels::set_threads(threads);
    std::printf("threads: %d\n", lsi::kernels::threads());

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 1.0);

    // kl / fisher on a 64^3 grid
    {
        lsi::GridDist p, q;
        p.axes = lsi::box_axes(3, 8.0, 64);
        q.axes = p.axes;
        const auto total = p.size();
        p.w.resize(total);
        q.w.resize(total);
        for (auto& v : p.w) v = u(rng);
        for (auto& v : q.w) v = u(rng);
        p.normalize();
        q.normalize();

        report("kl 64^3",
               time_best_of(3, [&] { lsi::kernels::kl_cells_serial(p.w, q.w); }),
               time_best_of(3, [&] { lsi::kernels::kl_cells(p.w, q.w); }));
        report("fisher 64^3",
               time_best_of(3, [&] { lsi::kernels::fisher_cells_serial(p, q); }),
               time_best_of(3, [&] { lsi::kernels::fisher_cells(p, q); }));
    }

    // one full sweep over a 3-D lattice model on a 48^3 grid
    {
        const lsi::PotentialSpec spec = lsi::build_lattice({3}, 0.15, 1.0);
        const auto axes = lsi::box_axes(3, 8.0, 48);
        std::vector<int> dims{48, 48, 48};
        std::vector<double> w(lsi::tensor_size(dims));
        for (auto& v : w) v = u(rng);
        std::vector<std::vector<double>> qtabs;
        for (int s = 0; s < 3; ++s) qtabs.push_back(lsi::conditional_table(spec, axes, s));

        auto run_sweep = [&](bool parallel) {
            auto work = w;
            for (int s = 0; s < 3; ++s) {
                if (parallel)
                    lsi::kernels::sweep_site(work, dims, s, qtabs[s]);
                else
                    lsi::kernels::sweep_site_serial(work, dims, s, qtabs[s]);
            }
        };
        report("gibbs sweep 48^3", time_best_of(3, [&] { run_sweep(false); }),
               time_best_of(3, [&] { run_sweep(true); }));

        report("column kl 48^3",
               time_best_of(3, [&] { lsi::kernels::column_kl_serial(w, dims, 1, qtabs[1]); }),
               time_best_of(3, [&] { lsi::kernels::column_kl(w, dims, 1, qtabs[1]); }));

        report("marginalize 48^3",
               time_best_of(3, [&] {
                   lsi::kernels::marginalize_serial(w, dims, {true, false, true});
               }),
               time_best_of(3, [&] {
                   lsi::kernels::marginalize(w, dims, {true, false, true});
               }));
    }
    return 0;
}
