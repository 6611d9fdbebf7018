#include "labmatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace labmatch {

std::vector<int> draw_firm_types(const EconomyConfig& cfg, Rng& rng) {
    const int n = cfg.n_firms;
    const int M = cfg.n_types();
    std::vector<int> types(n);
    if (cfg.capital_draw == CapitalDraw::exact_counts) {
        // Largest-remainder rounding of n q_m, laid out in type order.
        std::vector<int> cnt(M);
        std::vector<std::pair<double, int>> rem;
        int used = 0;
        for (int m = 0; m < M; ++m) {
            const double x = n * cfg.capital_mass[m];
            cnt[m] = static_cast<int>(std::floor(x));
            used += cnt[m];
            rem.push_back({x - cnt[m], m});
        }
        std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
        for (int r = 0; r < n - used; ++r) ++cnt[rem[r].second];
        int pos = 0;
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < cnt[m]; ++c) types[pos++] = m;
        return types;
    }
    std::vector<double> cum(M);
    std::partial_sum(cfg.capital_mass.begin(), cfg.capital_mass.end(), cum.begin());
    for (int j = 0; j < n; ++j) {
        const double u = uniform01(rng) * cum.back();
        types[j] = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (types[j] >= M) types[j] = M - 1;
    }
    return types;
}

namespace {

// Draws eta and returns the firms sorted by descending v (ties by index).
std::vector<int> pick_order(const std::vector<int>& types, const EconomyConfig& cfg, Rng& rng,
                            std::vector<double>* v_out) {
    const int n = static_cast<int>(types.size());
    std::normal_distribution<double> eta(0.0, cfg.sigma);
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) v[j] = cfg.beta * cfg.capital_support[types[j]] + eta(rng);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
    if (v_out) *v_out = std::move(v);
    return order;
}

}  // namespace

MatchingOutcome simulate_matching(const Education& H, const std::vector<int>& firm_types,
                                  const FirmPreferenceSplit& split, const EconomyConfig& cfg, Rng& rng) {
    const int n = static_cast<int>(H.size());
    if (static_cast<int>(firm_types.size()) != n)
        throw std::invalid_argument("simulate_matching: needs as many firms as workers");
    MatchingOutcome out;
    out.firm_type = firm_types;
    out.firm_order = pick_order(firm_types, cfg, rng, &out.v_index);
    out.firm_capital.resize(n);
    for (int j = 0; j < n; ++j) out.firm_capital[j] = cfg.capital_support[firm_types[j]];

    std::array<std::vector<int>, 2> pool;
    for (int i = 0; i < n; ++i) pool[H[i]].push_back(i);
    out.assignment.assign(n, -1);
    out.matched_type.assign(n, -1);
    out.matched_capital.assign(n, 0.0);
    for (int f : out.firm_order) {
        int lvl = split.high(firm_types[f]) ? 1 : 0;
        if (pool[lvl].empty()) lvl = 1 - lvl;
        auto& P = pool[lvl];
        std::uniform_int_distribution<std::size_t> pick(0, P.size() - 1);
        const std::size_t idx = pick(rng);
        const int w = P[idx];
        P[idx] = P.back();
        P.pop_back();
        out.assignment[w] = f;
        out.matched_type[w] = firm_types[f];
        out.matched_capital[w] = out.firm_capital[f];
    }
    return out;
}

MatchingOutcome simulate_economy(const Education& H, const FirmPreferenceSplit& split,
                                 const EconomyConfig& cfg, Rng& rng) {
    const std::vector<int> types = draw_firm_types(cfg, rng);
    return simulate_matching(H, types, split, cfg, rng);
}

Contingency contingency(const MatchingOutcome& out, const Education& H, int n_types) {
    Contingency c;
    c.n = out.size();
    c.counts[0].assign(n_types, 0);
    c.counts[1].assign(n_types, 0);
    for (int i = 0; i < c.n; ++i) ++c.counts[H[i]][out.matched_type[i]];
    return c;
}

Contingency simulate_contingency(int n_high, const FirmPreferenceSplit& split, const EconomyConfig& cfg,
                                 Rng& rng) {
    const std::vector<int> types = draw_firm_types(cfg, rng);
    const std::vector<int> order = pick_order(types, cfg, rng, nullptr);
    const int M = cfg.n_types();
    Contingency c;
    c.n = static_cast<int>(types.size());
    c.counts[0].assign(M, 0);
    c.counts[1].assign(M, 0);
    std::array<int, 2> left{c.n - n_high, n_high};
    for (int f : order) {
        int lvl = split.high(types[f]) ? 1 : 0;
        if (left[lvl] == 0) lvl = 1 - lvl;
        --left[lvl];
        ++c.counts[lvl][types[f]];
    }
    return c;
}

double contingency_distance(const Contingency& a, const Contingency& b) {
    int worst = 0;
    for (int l = 0; l < 2; ++l)
        for (std::size_t m = 0; m < a.counts[l].size(); ++m)
            worst = std::max(worst, std::abs(a.counts[l][m] - b.counts[l][m]));
    return double(worst) / a.n;
}

void assign_wages(MatchingOutcome& out, const Education& H, const Matrix& X, const EconomyConfig& cfg) {
    const int n = out.size();
    out.wages.resize(n);
    out.negative_profit.clear();
    for (int i = 0; i < n; ++i) {
        const double h = edu_value(cfg, H[i]);
        const double g = outside_option(h, X.row(i), X.cols, cfg);
        const Payoffs pay = bargain_payoffs(h, out.matched_capital[i], g, cfg);
        out.wages[i] = pay.wage;
        if (pay.profit < 0) out.negative_profit.push_back(i);
    }
}

double gini(const std::vector<double>& wages) {
    const int n = static_cast<int>(wages.size());
    std::vector<double> w(wages);
    std::sort(w.begin(), w.end());
    if (n == 0 || w.front() < 0) throw std::domain_error("gini: wages must be nonnegative");
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0) throw std::domain_error("gini: all wages are zero");
    double s = 0;
    for (int i = 0; i < n; ++i) s += (2.0 * (i + 1) - n - 1) * w[i];
    return s / (n * total);
}

static std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

OutcomeStats summarize(const MatchingOutcome& out, const Education& H, const EconomyConfig& cfg) {
    const int n = out.size();
    const int M = cfg.n_types();
    OutcomeStats s;
    std::vector<double> hv(n);
    double wh = 0, wl = 0;
    int nh = 0;
    for (int i = 0; i < n; ++i) {
        hv[i] = H[i];
        nh += H[i];
        if (!out.wages.empty()) (H[i] ? wh : wl) += out.wages[i];
    }
    s.edu_share = double(nh) / n;
    if (!out.wages.empty()) {
        s.gini = gini(out.wages);
        if (nh > 0 && nh < n) s.wage_premium = wh / nh - wl / (n - nh);
    }
    s.sort_corr = pearson(hv, out.matched_capital);
    const Contingency c = contingency(out, H, M);
    for (int l = 0; l < 2; ++l) {
        s.contingency[l].resize(M);
        for (int m = 0; m < M; ++m) s.contingency[l][m] = c.share(l, m);
    }
    return s;
}

bool dictatorship_consistent(const MatchingOutcome& out, const Education& H, const FirmPreferenceSplit& split) {
    const int n = out.size();
    std::vector<int> holder(n, -1);
    for (int i = 0; i < n; ++i) holder[out.assignment[i]] = i;
    // Count workers of each level still held by firms later in the order.
    std::array<int, 2> later{0, 0};
    for (int i = 0; i < n; ++i) ++later[H[i]];
    for (int f : out.firm_order) {
        const int got = H[holder[f]];
        --later[got];
        const int want = split.high(out.firm_type[f]) ? 1 : 0;
        if (got != want && later[want] > 0) return false;
    }
    return true;
}

} // namespace labmatch
