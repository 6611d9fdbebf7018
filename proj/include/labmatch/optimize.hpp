#pragma once

#include <functional>
#include <vector>

namespace labmatch {

struct NelderMeadOptions {
    double initial_step = 0.2;  // relative to max(|x_i|, 0.5)
    double ftol = 1e-10;
    double xtol = 1e-8;
    int max_evals = 4000;
    int restarts = 1;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0;
    int evals = 0;
    bool converged = false;
};

// Minimizes f from x0. Non-finite values act as an extreme barrier: such
// points are never accepted as improvements, so the search stays inside the
// region where f is finite once it starts there.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opt = {});

} // namespace labmatch
