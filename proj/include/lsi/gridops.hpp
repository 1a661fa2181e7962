#pragma once

#include <vector>

#include "lsi/gaussian.hpp"
#include "lsi/grid.hpp"
#include "lsi/model.hpp"

namespace lsi {

// Default truncation box [-10 sigma_max, 10 sigma_max] on every axis.
std::vector<GridAxis> default_box_axes(const GaussianDist& g, int points);
std::vector<GridAxis> box_axes(int dim, double half_width, int points);

struct Discretized {
    GridDist dist;
    double clipped_mass = 0.0;  // estimated mass outside the box, renormalized away
};

Discretized discretize(const GaussianDist& g, const std::vector<GridAxis>& axes);

// Grid-normalized Gibbs measure exp(-V) on the box.
GridDist grid_gibbs(const PotentialSpec& spec, const std::vector<GridAxis>& axes);

// Normalized conditional Q_i(. | xbar) tabulated over the whole configuration
// tensor: entry at cell x is Q_i(x_i | x_{k != i}), columns along axis i sum
// to one.
std::vector<double> conditional_table(const PotentialSpec& spec,
                                      const std::vector<GridAxis>& axes, int site);

}  // namespace lsi
