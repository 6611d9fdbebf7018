#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "labmatch/config.hpp"
#include "labmatch/exec.hpp"
#include "labmatch/model.hpp"

namespace labmatch {

double binomial_pmf(int x, int n, double p);
// d/dp of binomial_pmf, computed as n * (B(x-1; n-1, p) - B(x; n-1, p)).
double binomial_pmf_dp(int x, int n, double p);

// Integer evaluation nodes on {0, ..., max_value}. Each node owns the
// integers closer to it than to its neighbours (ties go to the lower node),
// so cell masses of any distribution on the lattice sum to one.
struct SupportGrid {
    std::vector<int> nodes;
    std::vector<int> cell_lo;
    std::vector<int> cell_hi;
    int size() const { return static_cast<int>(nodes.size()); }
};

SupportGrid make_support_grid(int max_value, int n_nodes);
SupportGrid single_node_grid(int value);
int default_node_count(int n, int requested);
std::vector<double> cell_weights(const SupportGrid& g, int trials, double p);
std::vector<double> cell_weight_derivs(const SupportGrid& g, int trials, double p);

// Everything the matching probabilities depend on apart from theta (which
// enters only through the preference split) and beta.
struct MatchSettings {
    int n = 0;
    std::vector<double> capital;
    std::vector<double> mass;
    double sigma = 1.0;
    int beta_draws = 100;
    int support_nodes = 0;
    OrderStatConvention convention = OrderStatConvention::exclusive;
    std::uint64_t draw_seed = 0;

    static MatchSettings from(const EconomyConfig& cfg, std::uint64_t draw_seed);
    int n_types() const { return static_cast<int>(capital.size()); }
};

// Distribution over capital types of the firm matched to a worker who chose
// level j (1 = high), given n_j other workers at that level and n_pref firms
// that prefer it.
std::vector<double> conditional_match_dist(int j, int n_j, int n_pref, const FirmPreferenceSplit& split,
                                           double beta, const MatchSettings& s);
double conditional_match_prob(int m, int j, int n_j, int n_pref, const FirmPreferenceSplit& split,
                              double beta, const MatchSettings& s);

// Conditional match distributions on the (n_j, n_pref) node grid for one
// preference split and one beta. Independent of the choice probability.
struct MatchProbBlock {
    int n = 0;
    int n_types = 0;
    std::uint64_t mask = 0;
    double beta = 0;
    double q_high = 0;
    std::array<SupportGrid, 2> worker_grid;  // over n_j in 0..n-1
    std::array<SupportGrid, 2> firm_grid;    // over n_pref in 0..n
    // prob[j][(a * firm_nodes + b) * M + m]
    std::array<std::vector<double>, 2> prob;
};

MatchProbBlock build_block(const FirmPreferenceSplit& split, double beta, const MatchSettings& s,
                           Exec exec = Exec::parallel);

struct MatchProbTable {
    std::array<std::vector<double>, 2> pi;       // pi[j][m]
    std::array<double, 2> raw_mass{0, 0};        // column sums before renormalizing
    double beta = 0;
    double p_high = 0;
    double q_high = 0;
    std::uint64_t mask = 0;
    std::array<SupportGrid, 2> worker_grid;
    std::array<SupportGrid, 2> firm_grid;
};

MatchProbTable pi_table(const MatchProbBlock& block, double p_high);
// d pi[j][m] / d p_high at fixed split and beta.
std::array<std::vector<double>, 2> pi_table_dp(const MatchProbBlock& block, double p_high);

MatchProbTable pi_table(const FirmPreferenceSplit& split, double p_high, const EconomyConfig& cfg,
                        std::uint64_t draw_seed);

double expected_production(int j, const MatchProbTable& table, const EconomyConfig& cfg);
double expected_production(int j, const std::vector<double>& pi_j, const EconomyConfig& cfg);

// Write-once cache of blocks keyed by (split mask, beta). The preference
// split takes at most M + 1 values under complementarity, so a likelihood
// search touches only a handful of blocks.
class BlockCache {
public:
    explicit BlockCache(MatchSettings s, Exec exec = Exec::parallel) : s_(std::move(s)), exec_(exec) {}
    std::shared_ptr<const MatchProbBlock> get(const FirmPreferenceSplit& split, double beta);
    const MatchSettings& settings() const { return s_; }
    std::size_t size() const;

private:
    MatchSettings s_;
    Exec exec_;
    mutable std::mutex mu_;
    std::map<std::pair<std::uint64_t, double>, std::shared_ptr<const MatchProbBlock>> blocks_;
};

void write_pi_csv(std::ostream& os, const MatchProbTable& t);

} // namespace labmatch
