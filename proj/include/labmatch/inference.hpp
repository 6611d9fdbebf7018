#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "labmatch/config.hpp"
#include "labmatch/equilibrium.hpp"
#include "labmatch/exec.hpp"
#include "labmatch/matcher.hpp"
#include "labmatch/matchprob.hpp"
#include "labmatch/model.hpp"
#include "labmatch/optimize.hpp"

namespace labmatch {

// What the econometrician sees: covariates, education and the matched
// capital type of every worker.
struct ObservedData {
    Matrix X;
    Education H;
    std::vector<int> matched_type;

    int size() const { return static_cast<int>(H.size()); }
    int n_high() const;
    Contingency table(int n_types) const;
};

class DegenerateData : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct LikelihoodEvaluation {
    std::vector<double> theta;
    double beta = 0;
    double loglik = 0;
    std::vector<double> phat;  // filled on request
    int case_index = 0;
    std::uint64_t mask = 0;
};

// Log-likelihood of education choices for one dataset at fixed beta, with
// the choice probabilities of other workers replaced by the sample share of
// high education. Matching-probability tables are assembled from the block
// cache once per preference split and reused for every theta in that split.
class Likelihood {
public:
    Likelihood(const EconomyConfig& cfg, BlockCache& cache, const Education& H, const Matrix& X, double beta);

    LikelihoodEvaluation evaluate(const std::vector<double>& theta, bool want_phat = false) const;
    double operator()(const std::vector<double>& theta) const { return evaluate(theta).loglik; }
    // Same value recomputed without any cached table.
    double from_scratch(const std::vector<double>& theta) const;

    std::uint64_t mask_at(const std::vector<double>& theta) const;
    // P(H = h, K = k_m) implied by the split at the sample share p_hat.
    std::array<std::vector<double>, 2> implied_table(std::uint64_t mask) const;
    double p_hat() const { return p_hat_; }
    double beta() const { return beta_; }
    int size() const { return static_cast<int>(H_.size()); }
    const EconomyConfig& config() const { return cfg_; }
    // Candidate preference splits ordered from all-high upward in case index.
    std::vector<std::uint64_t> candidate_masks() const;
    // Interval of theta1 in which the split equals mask at the given theta2:
    // [lo, hi). Empty when lo >= hi.
    std::pair<double, double> theta1_range(std::uint64_t mask, const std::vector<double>& theta2) const;

private:
    double unit_gap(std::uint64_t mask) const;
    const MatchProbTable& table(std::uint64_t mask) const;
    double outside_gap_mean(const std::vector<double>& theta2) const;

    EconomyConfig cfg_;
    BlockCache& cache_;
    Education H_;
    Matrix X_;
    double beta_;
    double p_hat_;
    std::vector<double> dcost_;
    std::vector<double> prod_slope_;  // f(h_high, k_m; 1) - f(h_low, k_m; 1)
    mutable std::mutex mu_;
    mutable std::map<std::uint64_t, std::pair<MatchProbTable, double>> tables_;
};

// Textbook sign convention: the negative log-likelihood, minimized.
inline double neg_loglik(const Likelihood& L, const std::vector<double>& theta) { return -L(theta); }

struct EstimateOptions {
    NelderMeadOptions nm;
    std::vector<double> start;  // empty uses the config's theta
    std::vector<bool> fixed;    // components held at their start value
    // all_splits maximizes within every reachable preference split; local
    // runs one simplex search from the start across split boundaries.
    enum class Search { all_splits, local } search = Search::all_splits;
    // Which splits all_splits visits: every candidate, or only those whose
    // implied (education, capital) table is closest to the observed matching.
    enum class SplitRule { all, matched } split_rule = SplitRule::all;
    std::optional<Contingency> matching;      // required by SplitRule::matched
    std::optional<std::uint64_t> only_split;  // restrict the search to one mask
};

struct CaseOptimum {
    std::uint64_t mask = 0;
    int case_index = 0;
    bool feasible = false;
    std::vector<double> theta;
    double loglik = -INFINITY;
    int evals = 0;
};

struct ThetaEstimate {
    std::vector<double> theta;
    double loglik = -INFINITY;
    int case_index = 0;
    std::uint64_t mask = 0;
    std::vector<CaseOptimum> per_case;
    int evals = 0;
};

// Maximizes the log-likelihood separately within every preference split
// reachable from the start so the jumps between splits cannot trap the
// search. Throws DegenerateData when only one education level is observed.
ThetaEstimate estimate_theta(double beta, const Education& H, const Matrix& X, const EconomyConfig& cfg,
                             BlockCache& cache, const EstimateOptions& opt = {});

enum class RegionKind { theta_bootstrap, beta_inversion, two_stage };

struct ConfidenceRegion {
    RegionKind kind = RegionKind::theta_bootstrap;
    double level = 0.95;
    // theta regions
    double contrast_lo = 0, contrast_hi = 0;
    std::vector<double> box_lo, box_hi;
    // beta regions; status 1 accepted, 0 rejected, -1 undetermined
    std::vector<double> grid;
    std::vector<int> status;

    std::vector<double> accepted() const;
    bool contains_beta(double b) const;
};

// Empirical quantile using the inf definition: the ceil(q n)-th smallest.
double empirical_quantile(std::vector<double> v, double q);

struct BootstrapOptions {
    int B = 200;
    double alpha = 0.05;
    std::vector<double> contrast;  // empty means all ones
    double max_fail_share = 0.05;
    EstimateOptions estimate;
};

struct BootstrapResult {
    std::vector<std::vector<double>> draws;  // successful re-estimates
    std::vector<double> contrast_values;
    int failures = 0;
    ConfidenceRegion region;
};

// Parametric bootstrap holding X fixed: solve the equilibrium at
// (theta_hat, beta), redraw education, re-estimate. Streams are keyed by
// (seed, tag, b) so the draws do not depend on the thread count.
BootstrapResult bootstrap_theta_ci(const std::vector<double>& theta_hat, double beta, const Matrix& X,
                                   const EconomyConfig& cfg, BlockCache& cache, const BootstrapOptions& opt,
                                   std::uint64_t seed, std::uint64_t tag, Exec exec = Exec::parallel);

// Percentile interval of a'theta at level 1 - alpha from stored draws.
std::pair<double, double> contrast_interval(const BootstrapResult& r, double alpha);
// Componentwise box with joint level at least 1 - alpha by Bonferroni.
void bonferroni_box(const BootstrapResult& r, double alpha, std::vector<double>& lo, std::vector<double>& hi);

// T = (1/R) sum_r max_{h,m} |P(h,m; obs) - P(h,m; sim_r)|.
double contingency_statistic(const Contingency& observed, const std::vector<Contingency>& sims);

struct McTestResult {
    double beta = 0;
    double t_obs = 0;
    std::vector<double> t_sims;
    double critical = 0;
    bool reject = false;
};

// Critical value: the ceil(R (1 - alpha))-th smallest simulated statistic.
double mc_critical(const std::vector<double>& t_sims, double alpha);

// Common-random-number simulation of the contingency at (split, beta) for a
// given number of high-education workers; replicate s of a given
// (beta, split, n_high) always comes from the same stream.
Contingency sim_contingency(const FirmPreferenceSplit& split, double beta, int n_high, int s,
                            const EconomyConfig& cfg, std::uint64_t seed);

// Monte Carlo test at one beta. The simulated matchings reuse the observed
// education vector. T_r compares replicate r with the other R members of the
// pool formed by the observation and the R replicates.
McTestResult mc_test(const Contingency& observed, int n_high, const FirmPreferenceSplit& split, double beta,
                     const EconomyConfig& cfg, int R, double alpha, std::uint64_t seed, Exec exec = Exec::parallel);

struct BetaInversion {
    ConfidenceRegion region;
    std::vector<McTestResult> tests;
};

BetaInversion mc_confidence_beta(const ObservedData& data, const std::vector<double>& theta,
                                 const EconomyConfig& cfg, const std::vector<double>& grid, int R, double alpha,
                                 std::uint64_t seed, Exec exec = Exec::parallel);

struct TwoStageOptions {
    int R = 99;
    double alpha = 0.05;
    int lhs_points = 8;
    BootstrapOptions first_stage;  // alpha is overwritten by alpha / 2
    // Skip the first stage and use theta as a known point; the second stage
    // then runs at the full alpha.
    std::optional<std::vector<double>> oracle_theta;
};

struct TwoStageRow {
    double beta = 0;
    double s_obs = 0;
    double critical = 0;
    int status = -1;
    std::vector<double> box_lo, box_hi;
    std::string note;
};

struct TwoStageResult {
    ConfidenceRegion region;
    std::vector<TwoStageRow> rows;
};

// Box vertices, centroid and Latin-hypercube interior points, preceded by
// the centre.
std::vector<std::vector<double>> theta_grid(const std::vector<double>& center, const std::vector<double>& lo,
                                            const std::vector<double>& hi, int lhs_points, Rng& rng);

// Second stage at one beta over an explicit theta grid whose first element
// is the first-stage estimate.
TwoStageRow two_stage_at(const ObservedData& data, double beta, const std::vector<std::vector<double>>& grid,
                         const EconomyConfig& cfg, BlockCache& cache, int R, double alpha, std::uint64_t seed,
                         Exec exec = Exec::parallel);

TwoStageResult two_stage_beta(const ObservedData& data, const EconomyConfig& cfg, const std::vector<double>& grid,
                              const TwoStageOptions& opt, std::uint64_t seed, Exec exec = Exec::parallel);

void write_beta_csv(std::ostream& os, const BetaInversion& r);
void write_two_stage_csv(std::ostream& os, const TwoStageResult& r);

} // namespace labmatch
