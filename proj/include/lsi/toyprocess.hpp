#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lsi/errors.hpp"

namespace lsi {

// Fully enumerated finite process for brute-forcing the entropy
// decomposition: joint holds the law of (Y(1), ..., Y(s+1)) over
// alphabet^(n (s+1)) with time-major coordinate order, target the positive
// reference law q over alphabet^n.
struct ToyProcessSpec {
    int n = 0;
    int alphabet = 0;
    int horizon = 0;  // s
    std::vector<double> joint;
    std::vector<double> target;

    void validate() const;
};

// Slack (right side minus left side) of the decomposition
//   D(Y(1)||X) <= sum_{t<=s'} sum_i D(Y_i(t)|window || Q_i(.|window)) + D(Y(s'+1)||X)
// for every horizon s' = 1..s, each evaluated by exhaustive summation.
std::vector<double> aux_theorem_bruteforce(const ToyProcessSpec& toy);

// Deterministic random toy process generator for property sweeps.
ToyProcessSpec random_toy_process(int n, int alphabet, int horizon, std::mt19937_64& rng);

}  // namespace lsi
