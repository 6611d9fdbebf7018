#include "labmatch/matchprob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "labmatch/orderstat.hpp"

namespace labmatch {

double binomial_pmf(int x, int n, double p) {
    if (!(p >= 0 && p <= 1)) throw std::domain_error("binomial_pmf: p outside [0,1]");
    if (x < 0 || x > n) return 0.0;
    if (p == 0) return x == 0 ? 1.0 : 0.0;
    if (p == 1) return x == n ? 1.0 : 0.0;
    const double lc = std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0);
    return std::exp(lc + x * std::log(p) + (n - x) * std::log1p(-p));
}

double binomial_pmf_dp(int x, int n, double p) {
    if (n == 0) return 0.0;
    return n * (binomial_pmf(x - 1, n - 1, p) - binomial_pmf(x, n - 1, p));
}

int default_node_count(int n, int requested) {
    if (requested > 0) return requested;
    return std::max((n + 49) / 50, 10);
}

SupportGrid make_support_grid(int max_value, int n_nodes) {
    SupportGrid g;
    const int support = max_value + 1;
    n_nodes = std::clamp(n_nodes, 1, support);
    if (n_nodes == 1) {
        g.nodes = {max_value / 2};
    } else {
        for (int i = 0; i < n_nodes; ++i) {
            const int v = static_cast<int>(std::lround(double(i) * max_value / (n_nodes - 1)));
            if (g.nodes.empty() || v > g.nodes.back()) g.nodes.push_back(v);
        }
    }
    const int k = g.size();
    g.cell_lo.resize(k);
    g.cell_hi.resize(k);
    for (int i = 0; i < k; ++i) {
        g.cell_lo[i] = i == 0 ? 0 : g.cell_hi[i - 1] + 1;
        g.cell_hi[i] = i == k - 1 ? max_value : (g.nodes[i] + g.nodes[i + 1]) / 2;
    }
    return g;
}

SupportGrid single_node_grid(int value) {
    SupportGrid g;
    g.nodes = {value};
    g.cell_lo = {value};
    g.cell_hi = {value};
    return g;
}

std::vector<double> cell_weights(const SupportGrid& g, int trials, double p) {
    std::vector<double> w(g.size(), 0.0);
    for (int i = 0; i < g.size(); ++i)
        for (int x = g.cell_lo[i]; x <= g.cell_hi[i]; ++x) w[i] += binomial_pmf(x, trials, p);
    return w;
}

std::vector<double> cell_weight_derivs(const SupportGrid& g, int trials, double p) {
    // Cell masses telescope: d/dp sum_{x=lo}^{hi} B(x) = N (B(lo-1; N-1) - B(hi; N-1)).
    std::vector<double> w(g.size(), 0.0);
    if (trials == 0) return w;
    for (int i = 0; i < g.size(); ++i)
        w[i] = trials * (binomial_pmf(g.cell_lo[i] - 1, trials - 1, p) -
                         binomial_pmf(g.cell_hi[i], trials - 1, p));
    return w;
}

MatchSettings MatchSettings::from(const EconomyConfig& cfg, std::uint64_t draw_seed) {
    MatchSettings s;
    s.n = cfg.n_workers;
    s.capital = cfg.capital_support;
    s.mass = cfg.capital_mass;
    s.sigma = cfg.sigma;
    s.beta_draws = cfg.beta_draws;
    s.support_nodes = cfg.support_nodes;
    s.convention = cfg.order_stat;
    s.draw_seed = draw_seed;
    return s;
}

namespace {

// Probability for each listed type that a firm of that type lies on the
// required side of the kappa-th order statistic of b draws from the pool's
// mixture.
std::vector<double> threshold_probs(int kappa, int b, const std::vector<int>& types,
                                    const std::vector<double>& post, double beta,
                                    const MatchSettings& s) {
    std::vector<double> a(types.size());
    std::vector<double> mu;
    for (int m : types) mu.push_back(beta * s.capital[m]);
    std::vector<double> u;
    if (kappa >= 1 && kappa <= b) u = beta_draws(s.draw_seed, kappa, b, s.beta_draws);
    const NormalMixture G = make_mixture(s.capital, types, post, beta, s.sigma);
    a_coeff_common(kappa, b, u, G, mu, s.sigma, a.data());
    return a;
}

}  // namespace

std::vector<double> conditional_match_dist(int j, int n_j, int n_pref, const FirmPreferenceSplit& split,
                                           double beta, const MatchSettings& s) {
    const int n = s.n;
    const int M = s.n_types();
    if (n_j < 0 || n_j > n - 1 || n_pref < 0 || n_pref > n)
        throw std::out_of_range("conditional_match_dist: counts outside their support");
    const auto& pref = split.preferring(j);
    const auto& other = split.other(j);
    const auto& qp = split.posterior_pref(j);
    const auto& qo = split.posterior_other(j);
    const bool inclusive = s.convention == OrderStatConvention::inclusive;
    const int nbar = n_j + 1;
    std::vector<double> P(M, 0.0);

    // Without firms of one kind, n_pref is forced; counts inconsistent with
    // the split get the forced branch.
    if (pref.empty()) n_pref = 0;
    if (other.empty()) n_pref = n;

    if (n_pref >= nbar) {
        // Every level-j worker goes to one of the top nbar preferring firms.
        const int kappa = n_pref - nbar;
        const int b = inclusive ? n_pref : n_pref - 1;
        const auto a = threshold_probs(kappa, b, pref, qp, beta, s);
        double tot = 0;
        for (std::size_t i = 0; i < pref.size(); ++i) tot += qp[i] * (1 - a[i]);
        for (std::size_t i = 0; i < pref.size(); ++i)
            P[pref[i]] = tot > 0 ? qp[i] * (1 - a[i]) / tot : qp[i];
    } else {
        // All preferring firms take level-j workers; the remaining c go to
        // the lowest-v firms among the others once their own pool runs dry.
        const int c = nbar - n_pref;
        const int b_other = n - n_pref;
        for (std::size_t i = 0; i < pref.size(); ++i) P[pref[i]] = qp[i] * double(n_pref) / nbar;
        const int kappa = inclusive ? c + 1 : c;
        const int b = inclusive ? b_other : b_other - 1;
        const auto a = threshold_probs(kappa, b, other, qo, beta, s);
        double tot = 0;
        for (std::size_t i = 0; i < other.size(); ++i) tot += qo[i] * a[i];
        for (std::size_t i = 0; i < other.size(); ++i)
            P[other[i]] = double(c) / nbar * (tot > 0 ? qo[i] * a[i] / tot : qo[i]);
    }
    return P;
}

double conditional_match_prob(int m, int j, int n_j, int n_pref, const FirmPreferenceSplit& split,
                              double beta, const MatchSettings& s) {
    return conditional_match_dist(j, n_j, n_pref, split, beta, s).at(m);
}

MatchProbBlock build_block(const FirmPreferenceSplit& split, double beta, const MatchSettings& s,
                           Exec exec) {
    const int n = s.n;
    const int M = s.n_types();
    const int nodes = default_node_count(n, s.support_nodes);
    MatchProbBlock blk;
    blk.n = n;
    blk.n_types = M;
    blk.mask = split.mask;
    blk.beta = beta;
    blk.q_high = split.q_high;
    for (int j = 0; j < 2; ++j) {
        blk.worker_grid[j] = make_support_grid(n - 1, nodes);
        if (split.preferring(j).empty()) blk.firm_grid[j] = single_node_grid(0);
        else if (split.other(j).empty()) blk.firm_grid[j] = single_node_grid(n);
        else blk.firm_grid[j] = make_support_grid(n, nodes);

        const int A = blk.worker_grid[j].size();
        const int B = blk.firm_grid[j].size();
        auto& out = blk.prob[j];
        out.assign(std::size_t(A) * B * M, 0.0);
        const int cells = A * B;
        auto fill = [&](int idx) {
            const int a = idx / B, b = idx % B;
            const auto P = conditional_match_dist(j, blk.worker_grid[j].nodes[a],
                                                  blk.firm_grid[j].nodes[b], split, beta, s);
            std::copy(P.begin(), P.end(), out.begin() + std::size_t(idx) * M);
        };
        if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
            for (int idx = 0; idx < cells; ++idx) fill(idx);
        } else {
            for (int idx = 0; idx < cells; ++idx) fill(idx);
        }
    }
    return blk;
}

namespace {

double level_prob(int j, double p_high) { return j ? p_high : 1.0 - p_high; }

}  // namespace

MatchProbTable pi_table(const MatchProbBlock& blk, double p_high) {
    if (!(p_high >= 0 && p_high <= 1)) throw std::domain_error("pi_table: p_high outside [0,1]");
    MatchProbTable t;
    t.beta = blk.beta;
    t.p_high = p_high;
    t.q_high = blk.q_high;
    t.mask = blk.mask;
    t.worker_grid = blk.worker_grid;
    t.firm_grid = blk.firm_grid;
    const int M = blk.n_types;
    const int n = blk.n;
    for (int j = 0; j < 2; ++j) {
        const auto& wg = blk.worker_grid[j];
        const auto& fg = blk.firm_grid[j];
        const auto wn = cell_weights(wg, n - 1, level_prob(j, p_high));
        const auto wf = fg.size() == 1 ? std::vector<double>{1.0}
                                       : cell_weights(fg, n, level_prob(j, blk.q_high));
        std::vector<double> pi(M, 0.0);
        for (int a = 0; a < wg.size(); ++a) {
            if (wn[a] == 0) continue;
            for (int b = 0; b < fg.size(); ++b) {
                const double w = wn[a] * wf[b];
                if (w == 0) continue;
                const double* P = blk.prob[j].data() + (std::size_t(a) * fg.size() + b) * M;
                for (int m = 0; m < M; ++m) pi[m] += w * P[m];
            }
        }
        const double tot = std::accumulate(pi.begin(), pi.end(), 0.0);
        t.raw_mass[j] = tot;
        for (double& v : pi) v /= tot;
        t.pi[j] = std::move(pi);
    }
    return t;
}

std::array<std::vector<double>, 2> pi_table_dp(const MatchProbBlock& blk, double p_high) {
    std::array<std::vector<double>, 2> out;
    const int M = blk.n_types;
    const int n = blk.n;
    for (int j = 0; j < 2; ++j) {
        const auto& wg = blk.worker_grid[j];
        const auto& fg = blk.firm_grid[j];
        const double pj = level_prob(j, p_high);
        const double sign = j ? 1.0 : -1.0;
        const auto wn = cell_weights(wg, n - 1, pj);
        const auto dwn = cell_weight_derivs(wg, n - 1, pj);
        const auto wf = fg.size() == 1 ? std::vector<double>{1.0}
                                       : cell_weights(fg, n, level_prob(j, blk.q_high));
        std::vector<double> raw(M, 0.0), draw(M, 0.0);
        for (int a = 0; a < wg.size(); ++a) {
            for (int b = 0; b < fg.size(); ++b) {
                const double* P = blk.prob[j].data() + (std::size_t(a) * fg.size() + b) * M;
                for (int m = 0; m < M; ++m) {
                    raw[m] += wn[a] * wf[b] * P[m];
                    draw[m] += sign * dwn[a] * wf[b] * P[m];
                }
            }
        }
        const double S = std::accumulate(raw.begin(), raw.end(), 0.0);
        const double dS = std::accumulate(draw.begin(), draw.end(), 0.0);
        out[j].resize(M);
        for (int m = 0; m < M; ++m) out[j][m] = (draw[m] * S - raw[m] * dS) / (S * S);
    }
    return out;
}

MatchProbTable pi_table(const FirmPreferenceSplit& split, double p_high, const EconomyConfig& cfg,
                        std::uint64_t draw_seed) {
    const MatchSettings s = MatchSettings::from(cfg, draw_seed);
    return pi_table(build_block(split, cfg.beta, s), p_high);
}

double expected_production(int j, const std::vector<double>& pi_j, const EconomyConfig& cfg) {
    const double h = edu_value(cfg, j);
    double f = 0;
    for (std::size_t m = 0; m < pi_j.size(); ++m) f += production(h, cfg.capital_support[m], cfg) * pi_j[m];
    return f;
}

double expected_production(int j, const MatchProbTable& t, const EconomyConfig& cfg) {
    return expected_production(j, t.pi[j], cfg);
}

std::shared_ptr<const MatchProbBlock> BlockCache::get(const FirmPreferenceSplit& split, double beta) {
    const auto key = std::make_pair(split.mask, beta);
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = blocks_.find(key);
        if (it != blocks_.end()) return it->second;
    }
    // Built outside the lock; concurrent builders produce identical blocks
    // and the first insert wins.
    auto blk = std::make_shared<const MatchProbBlock>(build_block(split, beta, s_, exec_));
    std::lock_guard<std::mutex> lk(mu_);
    return blocks_.emplace(key, std::move(blk)).first->second;
}

std::size_t BlockCache::size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return blocks_.size();
}

void write_pi_csv(std::ostream& os, const MatchProbTable& t) {
    os << "edu_level,capital_type,pi\n";
    for (int j = 0; j < 2; ++j)
        for (std::size_t m = 0; m < t.pi[j].size(); ++m)
            os << (j ? "high" : "low") << ',' << m + 1 << ',' << t.pi[j][m] << '\n';
}

} // namespace labmatch
