#pragma once

#include <vector>

#include "lsi/grid.hpp"

// Data-parallel grid kernels. Every kernel has a serial reference twin used
// by the tests and the benchmark; the parallel variant runs with the thread
// count from LSI_CERTIFY_THREADS (0/unset means sequential).
namespace lsi::kernels {

int threads();
void set_threads(int t);

struct SumResult {
    double value = 0.0;
    bool infinite = false;
};

// sum over cells of p log(p/q); infinite when q = 0 on a cell with p > 0.
SumResult kl_cells(const std::vector<double>& p, const std::vector<double>& q);
SumResult kl_cells_serial(const std::vector<double>& p, const std::vector<double>& q);

// sum over cells of p |grad log(p/q)|^2 with centered differences of the
// log-weights, one-sided at boundaries and next to empty cells.
SumResult fisher_cells(const GridDist& p, const GridDist& q);
SumResult fisher_cells_serial(const GridDist& p, const GridDist& q);

// One site of the Gibbs sweep: replace each axis-i column of w by its total
// mass times the normalized conditional column qtab.
void sweep_site(std::vector<double>& w, const std::vector<int>& dims, int axis,
                const std::vector<double>& qtab);
void sweep_site_serial(std::vector<double>& w, const std::vector<int>& dims, int axis,
                       const std::vector<double>& qtab);

// sum over axis-i columns of colmass * KL(column/colmass || qtab column);
// columns with mass below 1e-14 contribute zero.
double column_kl(const std::vector<double>& joint, const std::vector<int>& dims,
                 int axis, const std::vector<double>& qtab);
double column_kl_serial(const std::vector<double>& joint, const std::vector<int>& dims,
                        int axis, const std::vector<double>& qtab);

// Marginal onto the kept axes (order preserved).
std::vector<double> marginalize(const std::vector<double>& w,
                                const std::vector<int>& dims,
                                const std::vector<bool>& keep);
std::vector<double> marginalize_serial(const std::vector<double>& w,
                                       const std::vector<int>& dims,
                                       const std::vector<bool>& keep);

}  // namespace lsi::kernels
