#pragma once

#include <string>
#include <vector>

#include "brsm/linalg.hpp"

namespace brsm {

struct GradCheckTensorReport {
    std::string name;
    double max_rel_error = 0.0;
    long checked = 0;
    long skipped = 0;  // coordinates whose perturbation changed the winner set
};

struct GradCheckReport {
    std::vector<GradCheckTensorReport> tensors;
    int instances = 0;
    double tolerance = 0.0;

    bool passed() const;
    std::string to_string() const;
};

struct GradCheckOptions {
    int instances = 20;
    double step = 1e-5;
    double tolerance = 1e-4;
    // Negative-control hook: perturb one analytic gradient so the suite must
    // report a failure.
    bool corrupt = false;
};

// Randomized micro instances (m <= 6, n <= 2, input <= 8, some partitioned)
// comparing every analytic gradient against central finite differences.
// Coordinates where the +/-h perturbation flips a winner, a group-max source,
// a memory-merge branch or a rectifier branch are skipped: the masked
// objective is only piecewise differentiable.
GradCheckReport run_gradcheck(std::uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace brsm
