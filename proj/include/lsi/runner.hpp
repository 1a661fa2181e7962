#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsi/errors.hpp"

namespace lsi {

struct RunConfig {
    enum class Command { Certify, Verify, Simulate, Lattice };

    Command command = Command::Certify;
    std::string model_path;
    std::string scenario_path;
    std::string out_path;
    std::string summary_path;
    std::string p0_path;
    std::string backend = "gaussian";
    int steps = 12;
    int grid_points = 16;
    double box = 8.0;
    double tol = 1e-8;
    std::uint64_t seed = 12345;
    std::vector<int> lattice_dims;
    double lattice_j = 0.1;
    double lattice_h = 1.0;
};

// Parses argv (without the program name); throws UsageError on bad input.
RunConfig parse_config(const std::vector<std::string>& args);

// Executes a validated config. Returns 0 on success, 1 when a certificate
// or an inequality check fails; IO and format problems throw.
int run(const RunConfig& config);

// FNV-1a over the file bytes, for reproducibility stamps in reports.
std::string file_hash(const std::string& path);

}  // namespace lsi
