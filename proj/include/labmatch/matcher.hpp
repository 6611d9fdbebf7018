#pragma once

#include <array>
#include <optional>
#include <vector>

#include "labmatch/config.hpp"
#include "labmatch/model.hpp"
#include "labmatch/rng.hpp"

namespace labmatch {

struct MatchingOutcome {
    std::vector<int> assignment;        // worker -> firm
    std::vector<int> firm_type;         // capital type index per firm
    std::vector<double> firm_capital;   // K_j
    std::vector<double> v_index;        // v_j = beta K_j + eta_j
    std::vector<int> firm_order;        // firms by descending v
    std::vector<int> matched_type;      // type of M(i)
    std::vector<double> matched_capital;
    std::vector<double> wages;
    std::vector<int> negative_profit;   // workers whose match has f < g

    int size() const { return static_cast<int>(assignment.size()); }
};

std::vector<int> draw_firm_types(const EconomyConfig& cfg, Rng& rng);

// Serial dictatorship: firms in descending v order each take a uniformly
// drawn remaining worker of their preferred level, or of the other level
// once the preferred pool is empty. Wages are left empty.
MatchingOutcome simulate_matching(const Education& H, const std::vector<int>& firm_types,
                                  const FirmPreferenceSplit& split, const EconomyConfig& cfg, Rng& rng);

// Draws firm types and then runs simulate_matching with the same stream.
MatchingOutcome simulate_economy(const Education& H, const FirmPreferenceSplit& split,
                                 const EconomyConfig& cfg, Rng& rng);

// Counts of matched (education, capital type) pairs.
struct Contingency {
    int n = 0;
    std::array<std::vector<int>, 2> counts;

    double share(int level, int m) const { return double(counts[level][m]) / n; }
};

Contingency contingency(const MatchingOutcome& out, const Education& H, int n_types);

// The contingency depends on education only through the number of high
// workers, so it can be produced without individual picks. Consumes the
// stream exactly as simulate_economy does up to the picks, hence agrees with
// contingency(simulate_economy(...)) on the same seed.
Contingency simulate_contingency(int n_high, const FirmPreferenceSplit& split, const EconomyConfig& cfg,
                                 Rng& rng);

// Largest absolute gap between two contingency tables as shares.
double contingency_distance(const Contingency& a, const Contingency& b);

// W(i) = tau f(H_i, K(i)) + (1 - tau) g(H_i, X_i); also records workers whose
// match violates participation.
void assign_wages(MatchingOutcome& out, const Education& H, const Matrix& X, const EconomyConfig& cfg);

double gini(const std::vector<double>& wages);

struct OutcomeStats {
    double edu_share = 0;
    double gini = 0;
    std::optional<double> sort_corr;     // missing when either variable is constant
    std::optional<double> wage_premium;  // missing when a class is empty
    std::array<std::vector<double>, 2> contingency;
};

OutcomeStats summarize(const MatchingOutcome& out, const Education& H, const EconomyConfig& cfg);

// No firm earlier in v order holds a worker of its non-preferred level while
// a worker of its preferred level went to a later firm.
bool dictatorship_consistent(const MatchingOutcome& out, const Education& H, const FirmPreferenceSplit& split);

} // namespace labmatch
