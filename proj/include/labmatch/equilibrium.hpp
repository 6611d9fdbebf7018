#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "labmatch/config.hpp"
#include "labmatch/exec.hpp"
#include "labmatch/matchprob.hpp"
#include "labmatch/model.hpp"

namespace labmatch {

// The investment game for a fixed worker sample: the preference split, the
// matching-probability block it induces and each worker's p-independent
// utility component (1 - tau)(g_high - g_low) - (c0_high - c0_low).
struct GameSetup {
    EconomyConfig cfg;
    FirmPreferenceSplit split;
    std::shared_ptr<const MatchProbBlock> block;
    std::vector<double> base;
};

GameSetup make_game(const EconomyConfig& cfg, const Matrix& X, BlockCache& cache);
GameSetup make_game(const EconomyConfig& cfg, const Matrix& X, const FirmPreferenceSplit& split,
                    BlockCache& cache);

// f~_high(p) - f~_low(p) and its derivative in p.
double production_gap(const GameSetup& g, double p_high);
double production_gap_dp(const GameSetup& g, double p_high);

double utility_gap(const std::vector<double>& x, double p_high, const GameSetup& g);
double utility_gap(int worker, double p_high, const GameSetup& g);

double logistic(double z);

struct BestResponse {
    double p_next = 0;
    std::vector<double> psi;
};

BestResponse best_response(double p_high, const GameSetup& g, Exec exec = Exec::parallel);

struct TracePoint {
    int iteration;
    double p;
    double residual;
};

struct EquilibriumSolution {
    double p_star = 0;
    std::vector<double> psi_star;
    int iterations = 0;
    double residual = 0;
    bool converged = false;
    bool unique_flag = false;  // determinant condition holds at p_star
    std::vector<TracePoint> trace;
};

EquilibriumSolution solve_fixed_point(const GameSetup& g, const SolverOptions& opt,
                                      Exec exec = Exec::parallel);
inline EquilibriumSolution solve_fixed_point(const GameSetup& g, Exec exec = Exec::parallel) {
    return solve_fixed_point(g, g.cfg.solver, exec);
}

// phi(p) is the derivative of one worker's best response in another
// worker's choice probability, Psi'(p) / (n - 1) under symmetry.
double phi_analytic(double p_high, const GameSetup& g);
double phi_numeric(double p_high, const GameSetup& g, double step = 1e-5);

// log |det J_n| = log |phi (n-1) - 1| + (n-1) log |1 + phi|.
double log_abs_det(double phi, int n);

struct UniquenessReport {
    bool flagged = false;
    double min_log_abs_det = 0;
    std::vector<double> phi;
};

UniquenessReport uniqueness_diagnostic(const std::vector<double>& p_grid, const GameSetup& g);

// H_i = high iff omega_i < psi_i with omega_i uniform.
Education sample_actions(const std::vector<double>& psi, Rng& rng);

void write_trace_csv(std::ostream& os, const EquilibriumSolution& sol);

} // namespace labmatch
