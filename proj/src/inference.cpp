#include "labmatch/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

namespace labmatch {

int ObservedData::n_high() const { return static_cast<int>(std::count(H.begin(), H.end(), 1)); }

Contingency ObservedData::table(int n_types) const {
    Contingency c;
    c.n = size();
    c.counts[0].assign(n_types, 0);
    c.counts[1].assign(n_types, 0);
    for (int i = 0; i < c.n; ++i) ++c.counts[H[i]][matched_type[i]];
    return c;
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::uint64_t bits(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

std::uint64_t hash_vector(const std::vector<double>& v) {
    std::uint64_t h = 0x51af3c2dULL;
    for (double x : v) h = splitmix64(h ^ bits(x));
    return h;
}

}  // namespace

// ---------------------------------------------------------------- likelihood

Likelihood::Likelihood(const EconomyConfig& cfg, BlockCache& cache, const Education& H, const Matrix& X,
                       double beta)
    : cfg_(cfg), cache_(cache), H_(H), X_(X), beta_(beta) {
    if (static_cast<int>(H.size()) != X.rows) throw std::invalid_argument("Likelihood: H and X differ in length");
    cfg_.beta = beta;
    p_hat_ = double(std::count(H.begin(), H.end(), 1)) / H.size();
    dcost_.assign(X.rows, 0.0);
    if (cfg.cost)
        for (int i = 0; i < X.rows; ++i)
            dcost_[i] = cost(cfg.h_high, X.row(i), X.cols, cfg) - cost(cfg.h_low, X.row(i), X.cols, cfg);
    for (double k : cfg.capital_support)
        prod_slope_.push_back(production(cfg.h_high, k, 1.0, cfg.production) -
                              production(cfg.h_low, k, 1.0, cfg.production));
}

double Likelihood::outside_gap_mean(const std::vector<double>& theta2) const {
    EconomyConfig c = cfg_;
    c.theta2 = theta2;
    double sl = 0, sh = 0;
    for (int i = 0; i < X_.rows; ++i) {
        sl += outside_option(c.h_low, X_.row(i), X_.cols, c);
        sh += outside_option(c.h_high, X_.row(i), X_.cols, c);
    }
    return (sh - sl) / X_.rows;
}

std::uint64_t Likelihood::mask_at(const std::vector<double>& theta) const {
    EconomyConfig c = cfg_;
    c.set_theta(theta);
    const OutsideValues o = outside_values(X_, c);
    return firm_preference_split(c, o.mean_low, o.mean_high).mask;
}

std::vector<std::uint64_t> Likelihood::candidate_masks() const {
    const int M = cfg_.n_types();
    std::set<double> levels(prod_slope_.begin(), prod_slope_.end());
    std::vector<std::uint64_t> masks{(std::uint64_t(1) << M) - 1};
    for (double u : levels) {
        std::uint64_t m = 0;
        for (int t = 0; t < M; ++t)
            if (prod_slope_[t] > u) m |= std::uint64_t(1) << t;
        masks.push_back(m);
    }
    return masks;
}

std::pair<double, double> Likelihood::theta1_range(std::uint64_t mask, const std::vector<double>& theta2) const {
    const double dg = outside_gap_mean(theta2);
    double lo = 0, hi = INFINITY;
    for (int m = 0; m < cfg_.n_types(); ++m) {
        const double t = dg / prod_slope_[m];
        if ((mask >> m) & 1u) lo = std::max(lo, t);
        else hi = std::min(hi, t);
    }
    return {lo, hi};
}

const MatchProbTable& Likelihood::table(std::uint64_t mask) const {
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = tables_.find(mask);
        if (it != tables_.end()) return it->second.first;
    }
    const FirmPreferenceSplit split = split_from_mask(mask, cfg_.capital_mass);
    MatchProbTable t = pi_table(*cache_.get(split, beta_), p_hat_);
    double g = 0;
    for (int m = 0; m < cfg_.n_types(); ++m) {
        const double k = cfg_.capital_support[m];
        g += production(cfg_.h_high, k, 1.0, cfg_.production) * t.pi[1][m] -
             production(cfg_.h_low, k, 1.0, cfg_.production) * t.pi[0][m];
    }
    std::lock_guard<std::mutex> lk(mu_);
    return tables_.emplace(mask, std::make_pair(std::move(t), g)).first->second.first;
}

double Likelihood::unit_gap(std::uint64_t mask) const {
    table(mask);
    std::lock_guard<std::mutex> lk(mu_);
    return tables_.at(mask).second;
}

std::array<std::vector<double>, 2> Likelihood::implied_table(std::uint64_t mask) const {
    const MatchProbTable& t = table(mask);
    std::array<std::vector<double>, 2> out;
    for (int j = 0; j < 2; ++j) {
        const double w = j ? p_hat_ : 1 - p_hat_;
        for (double v : t.pi[j]) out[j].push_back(w * v);
    }
    return out;
}

LikelihoodEvaluation Likelihood::evaluate(const std::vector<double>& theta, bool want_phat) const {
    const int n = X_.rows, d = X_.cols;
    if (static_cast<int>(theta.size()) != 1 + d) throw std::invalid_argument("theta has the wrong dimension");
    LikelihoodEvaluation ev;
    ev.theta = theta;
    ev.beta = beta_;
    const double hl = cfg_.h_low, hh = cfg_.h_high;
    const bool g1 = cfg_.outside == OutsideForm::g1_exp_interaction;
    std::vector<double> gdiff(n);
    double sl = 0, sh = 0;
    for (int i = 0; i < n; ++i) {
        const double* x = X_.row(i);
        double s = 0;
        for (int l = 0; l < d; ++l) s += x[l] * theta[1 + l];
        double gl, gh;
        if (g1) {
            gl = hl == 0 ? 1.0 : std::exp(hl * s);
            gh = std::exp(hh * s);
        } else {
            const double e = std::exp(s);
            gl = hl * e;
            gh = hh * e;
        }
        sl += gl;
        sh += gh;
        gdiff[i] = gh - gl;
    }
    EconomyConfig c = cfg_;
    c.theta1 = theta[0];
    const FirmPreferenceSplit split = firm_preference_split(c, sl / n, sh / n);
    ev.mask = split.mask;
    ev.case_index = split.case_index();
    const double common = cfg_.tau * theta[0] * unit_gap(split.mask);
    const double tw = 1 - cfg_.tau;
    double ll = 0;
    if (want_phat) ev.phat.resize(n);
    for (int i = 0; i < n; ++i) {
        const double delta = common + tw * gdiff[i] - dcost_[i];
        ll += (H_[i] ? delta : 0.0) - softplus(delta);
        if (want_phat) ev.phat[i] = logistic(delta);
    }
    ev.loglik = ll;
    return ev;
}

double Likelihood::from_scratch(const std::vector<double>& theta) const {
    EconomyConfig c = cfg_;
    c.set_theta(theta);
    const FirmPreferenceSplit split = firm_preference_split(c, X_);
    const MatchProbBlock blk = build_block(split, beta_, cache_.settings(), Exec::serial);
    const MatchProbTable t = pi_table(blk, p_hat_);
    const double fgap = expected_production(1, t, c) - expected_production(0, t, c);
    double ll = 0;
    for (int i = 0; i < X_.rows; ++i) {
        const double dg = outside_option(c.h_high, X_.row(i), X_.cols, c) - outside_option(c.h_low, X_.row(i), X_.cols, c);
        const double delta = c.tau * fgap + (1 - c.tau) * dg - dcost_[i];
        const double p = logistic(delta);
        ll += H_[i] ? std::log(p) : std::log1p(-p);
    }
    return ll;
}

// ---------------------------------------------------------------- estimation

ThetaEstimate estimate_theta(double beta, const Education& H, const Matrix& X, const EconomyConfig& cfg,
                             BlockCache& cache, const EstimateOptions& opt) {
    const long nh = std::count(H.begin(), H.end(), 1);
    if (nh == 0 || nh == static_cast<long>(H.size()))
        throw DegenerateData("estimation refused: only one education level is observed, so the choice "
                             "probabilities carry no information about theta");
    const Likelihood L(cfg, cache, H, X, beta);
    const std::vector<double> start = opt.start.empty() ? cfg.theta() : opt.start;
    const int dim = static_cast<int>(start.size());
    std::vector<bool> fixed = opt.fixed;
    fixed.resize(dim, false);
    std::vector<int> free;
    for (int i = 0; i < dim; ++i)
        if (!fixed[i]) free.push_back(i);

    ThetaEstimate best;
    if (opt.search == EstimateOptions::Search::local) {
        auto objective = [&](const std::vector<double>& z) -> double {
            std::vector<double> t = start;
            for (std::size_t k = 0; k < free.size(); ++k) t[free[k]] = z[k];
            if (!(t[0] > 0)) return INFINITY;
            return -L(t);
        };
        std::vector<double> z0;
        for (int k : free) z0.push_back(start[k]);
        const NelderMeadResult r = nelder_mead(objective, z0, opt.nm);
        if (!std::isfinite(r.f)) throw NumericalError("estimation failed: no finite likelihood near the start");
        best.theta = start;
        for (std::size_t k = 0; k < free.size(); ++k) best.theta[free[k]] = r.x[k];
        const LikelihoodEvaluation ev = L.evaluate(best.theta);
        best.loglik = ev.loglik;
        best.mask = ev.mask;
        best.case_index = ev.case_index;
        best.evals = r.evals;
        return best;
    }
    const std::vector<double> theta2_start(start.begin() + 1, start.end());
    std::vector<std::uint64_t> masks = L.candidate_masks();
    if (opt.only_split) masks = {*opt.only_split};
    std::vector<std::uint64_t> preferred;
    if (opt.split_rule == EstimateOptions::SplitRule::matched && !opt.only_split) {
        if (!opt.matching) throw std::invalid_argument("estimate_theta: matched split rule needs the observed matching");
        const Contingency& obs = *opt.matching;
        std::vector<double> dist;
        for (std::uint64_t mask : masks) {
            const auto tab = L.implied_table(mask);
            double d = 0;
            for (int j = 0; j < 2; ++j)
                for (int m = 0; m < cfg.n_types(); ++m) d = std::max(d, std::abs(tab[j][m] - obs.share(j, m)));
            dist.push_back(d);
        }
        const double best_d = *std::min_element(dist.begin(), dist.end());
        for (std::size_t i = 0; i < masks.size(); ++i)
            if (dist[i] <= best_d + 1e-9) preferred.push_back(masks[i]);
    }
    auto search = [&](const std::vector<std::uint64_t>& list) {
    for (std::uint64_t mask : list) {
        CaseOptimum co;
        co.mask = mask;
        co.case_index = cfg.n_types() - __builtin_popcountll(mask);
        std::vector<double> th = start;
        const auto [lo, hi] = L.theta1_range(mask, theta2_start);
        if (!(lo < hi)) {
            best.per_case.push_back(co);
            continue;
        }
        if (!(th[0] >= lo && th[0] < hi)) {
            if (fixed[0]) {
                best.per_case.push_back(co);
                continue;
            }
            if (std::isinf(hi)) th[0] = std::max(1.5 * lo, lo + 0.1);
            else if (lo == 0) th[0] = 0.5 * hi;
            else th[0] = 0.5 * (lo + hi);
        }
        auto objective = [&](const std::vector<double>& z) -> double {
            std::vector<double> t = th;
            for (std::size_t k = 0; k < free.size(); ++k) t[free[k]] = z[k];
            if (!(t[0] > 0)) return INFINITY;
            const LikelihoodEvaluation ev = L.evaluate(t);
            if (ev.mask != mask || !std::isfinite(ev.loglik)) return INFINITY;
            return -ev.loglik;
        };
        std::vector<double> z0;
        for (int k : free) z0.push_back(th[k]);
        if (!std::isfinite(objective(z0))) {
            best.per_case.push_back(co);
            continue;
        }
        if (free.empty()) {
            co.feasible = true;
            co.theta = th;
            co.loglik = -objective(z0);
        } else {
            const NelderMeadResult r = nelder_mead(objective, z0, opt.nm);
            co.feasible = std::isfinite(r.f);
            co.theta = th;
            for (std::size_t k = 0; k < free.size(); ++k) co.theta[free[k]] = r.x[k];
            co.loglik = -r.f;
            co.evals = r.evals;
        }
        best.evals += co.evals;
        if (co.feasible && co.loglik > best.loglik) {
            best.loglik = co.loglik;
            best.theta = co.theta;
            best.case_index = co.case_index;
            best.mask = co.mask;
        }
        best.per_case.push_back(co);
    }
    };
    if (!preferred.empty()) search(preferred);
    // The revealed split can be unreachable from the start; fall back to
    // every candidate.
    if (best.theta.empty()) search(masks);
    if (best.theta.empty()) throw NumericalError("estimation failed: no preference split is reachable from the start");
    return best;
}

// ---------------------------------------------------------------- regions

std::vector<double> ConfidenceRegion::accepted() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (status[i] == 1) out.push_back(grid[i]);
    return out;
}

bool ConfidenceRegion::contains_beta(double b) const {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] == b) return status[i] == 1;
    return false;
}

double empirical_quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("empirical_quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = std::ceil(q * v.size() - 1e-9);
    const long k = std::clamp(static_cast<long>(pos), 1L, static_cast<long>(v.size()));
    return v[k - 1];
}

// ---------------------------------------------------------------- bootstrap

BootstrapResult bootstrap_theta_ci(const std::vector<double>& theta_hat, double beta, const Matrix& X,
                                   const EconomyConfig& cfg, BlockCache& cache, const BootstrapOptions& opt,
                                   std::uint64_t seed, std::uint64_t tag, Exec exec) {
    EconomyConfig c = cfg;
    c.set_theta(theta_hat);
    c.beta = beta;
    const GameSetup game = make_game(c, X, cache);
    const EquilibriumSolution eq = solve_fixed_point(game, Exec::serial);
    if (!eq.converged) throw NumericalError("bootstrap: equilibrium at theta_hat did not converge");

    EstimateOptions eo = opt.estimate;
    eo.start = theta_hat;
    std::vector<std::optional<std::vector<double>>> slot(opt.B);
    auto one = [&](int b) {
        Rng rng = make_rng(seed, Stream::bootstrap, tag, static_cast<std::uint64_t>(b));
        const Education Hb = sample_actions(eq.psi_star, rng);
        EstimateOptions eb = eo;
        if (eb.split_rule == EstimateOptions::SplitRule::matched) {
            // The replicate's matching is simulated as well so the split can
            // be read from it the same way as from the data.
            const int nh = static_cast<int>(std::count(Hb.begin(), Hb.end(), 1));
            eb.matching = simulate_contingency(nh, game.split, c, rng);
        }
        try {
            slot[b] = estimate_theta(beta, Hb, X, c, cache, eb).theta;
        } catch (const NumericalError&) {
        }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int b = 0; b < opt.B; ++b) one(b);
    } else {
        for (int b = 0; b < opt.B; ++b) one(b);
    }

    BootstrapResult r;
    std::vector<double> a = opt.contrast;
    if (a.empty()) a.assign(theta_hat.size(), 1.0);
    for (auto& s : slot) {
        if (!s) {
            ++r.failures;
            continue;
        }
        r.contrast_values.push_back(std::inner_product(a.begin(), a.end(), s->begin(), 0.0));
        r.draws.push_back(std::move(*s));
    }
    if (r.failures > opt.max_fail_share * opt.B)
        throw NumericalError("bootstrap aborted: " + std::to_string(r.failures) + " of " + std::to_string(opt.B) +
                             " replications failed");
    r.region.kind = RegionKind::theta_bootstrap;
    r.region.level = 1 - opt.alpha;
    std::tie(r.region.contrast_lo, r.region.contrast_hi) = contrast_interval(r, opt.alpha);
    bonferroni_box(r, opt.alpha, r.region.box_lo, r.region.box_hi);
    return r;
}

std::pair<double, double> contrast_interval(const BootstrapResult& r, double alpha) {
    return {empirical_quantile(r.contrast_values, alpha / 2), empirical_quantile(r.contrast_values, 1 - alpha / 2)};
}

void bonferroni_box(const BootstrapResult& r, double alpha, std::vector<double>& lo, std::vector<double>& hi) {
    const std::size_t d = r.draws.front().size();
    const double tail = alpha / (2.0 * d);
    lo.assign(d, 0.0);
    hi.assign(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> col;
        for (const auto& t : r.draws) col.push_back(t[k]);
        lo[k] = empirical_quantile(col, tail);
        hi[k] = empirical_quantile(col, 1 - tail);
    }
}

// ---------------------------------------------------------------- MC tests

double contingency_statistic(const Contingency& observed, const std::vector<Contingency>& sims) {
    double s = 0;
    for (const auto& y : sims) s += contingency_distance(observed, y);
    return s / sims.size();
}

double mc_critical(const std::vector<double>& t_sims, double alpha) {
    return empirical_quantile(t_sims, 1 - alpha);
}

Contingency sim_contingency(const FirmPreferenceSplit& split, double beta, int n_high, int s,
                            const EconomyConfig& cfg, std::uint64_t seed) {
    EconomyConfig c = cfg;
    c.beta = beta;
    Rng rng = make_rng(seed, Stream::mc_sims, bits(beta), static_cast<std::uint64_t>(s),
                       (split.mask << 32) ^ static_cast<std::uint64_t>(n_high));
    return simulate_contingency(n_high, split, c, rng);
}

namespace {

std::vector<Contingency> sim_batch(const FirmPreferenceSplit& split, double beta, int n_high, int first, int count,
                                   const EconomyConfig& cfg, std::uint64_t seed, Exec exec) {
    std::vector<Contingency> out(count);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int s = 0; s < count; ++s) out[s] = sim_contingency(split, beta, n_high, first + s, cfg, seed);
    } else {
        for (int s = 0; s < count; ++s) out[s] = sim_contingency(split, beta, n_high, first + s, cfg, seed);
    }
    return out;
}

}  // namespace

McTestResult mc_test(const Contingency& observed, int n_high, const FirmPreferenceSplit& split, double beta,
                     const EconomyConfig& cfg, int R, double alpha, std::uint64_t seed, Exec exec) {
    const std::vector<Contingency> Y = sim_batch(split, beta, n_high, 0, R, cfg, seed, exec);
    McTestResult r;
    r.beta = beta;
    r.t_obs = contingency_statistic(observed, Y);
    r.t_sims.assign(R, 0.0);
    for (int a = 0; a < R; ++a) {
        double s = contingency_distance(Y[a], observed);
        for (int b = 0; b < R; ++b)
            if (b != a) s += contingency_distance(Y[a], Y[b]);
        r.t_sims[a] = s / R;
    }
    r.critical = mc_critical(r.t_sims, alpha);
    r.reject = !(r.t_obs <= r.critical);
    return r;
}

BetaInversion mc_confidence_beta(const ObservedData& data, const std::vector<double>& theta,
                                 const EconomyConfig& cfg, const std::vector<double>& grid, int R, double alpha,
                                 std::uint64_t seed, Exec exec) {
    if (grid.empty()) throw std::invalid_argument("mc_confidence_beta: empty beta grid");
    EconomyConfig c = cfg;
    c.set_theta(theta);
    const FirmPreferenceSplit split = firm_preference_split(c, data.X);
    const Contingency obs = data.table(cfg.n_types());
    BetaInversion out;
    out.region.kind = RegionKind::beta_inversion;
    out.region.level = 1 - alpha;
    for (double b : grid) {
        out.tests.push_back(mc_test(obs, data.n_high(), split, b, c, R, alpha, seed, exec));
        out.region.grid.push_back(b);
        out.region.status.push_back(out.tests.back().reject ? 0 : 1);
    }
    return out;
}

// ---------------------------------------------------------------- two-stage

std::vector<std::vector<double>> theta_grid(const std::vector<double>& center, const std::vector<double>& lo,
                                            const std::vector<double>& hi, int lhs_points, Rng& rng) {
    const int d = static_cast<int>(center.size());
    std::vector<std::vector<double>> g{center};
    for (int v = 0; v < (1 << d); ++v) {
        std::vector<double> t(d);
        for (int k = 0; k < d; ++k) t[k] = (v >> k) & 1 ? hi[k] : lo[k];
        g.push_back(t);
    }
    std::vector<double> mid(d);
    for (int k = 0; k < d; ++k) mid[k] = 0.5 * (lo[k] + hi[k]);
    g.push_back(mid);
    if (lhs_points > 0) {
        std::vector<std::vector<int>> perm(d, std::vector<int>(lhs_points));
        for (auto& p : perm) {
            std::iota(p.begin(), p.end(), 0);
            std::shuffle(p.begin(), p.end(), rng);
        }
        for (int i = 0; i < lhs_points; ++i) {
            std::vector<double> t(d);
            for (int k = 0; k < d; ++k) t[k] = lo[k] + (hi[k] - lo[k]) * (perm[k][i] + uniform01(rng)) / lhs_points;
            g.push_back(t);
        }
    }
    return g;
}

TwoStageRow two_stage_at(const ObservedData& data, double beta, const std::vector<std::vector<double>>& grid,
                         const EconomyConfig& cfg, BlockCache& cache, int R, double alpha, std::uint64_t seed,
                         Exec exec) {
    const int n = data.size();
    const int M = cfg.n_types();
    const int n_obs = data.n_high();
    const Contingency obs = data.table(M);
    EconomyConfig cb = cfg;
    cb.beta = beta;

    // Preference splits reached by the grid; simulations given H depend on
    // theta only through the split.
    std::vector<FirmPreferenceSplit> splits;
    std::vector<int> split_of(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        EconomyConfig c = cb;
        c.set_theta(grid[g]);
        const FirmPreferenceSplit s = firm_preference_split(c, data.X);
        int idx = -1;
        for (std::size_t i = 0; i < splits.size(); ++i)
            if (splits[i].mask == s.mask) idx = static_cast<int>(i);
        if (idx < 0) {
            idx = static_cast<int>(splits.size());
            splits.push_back(s);
        }
        split_of[g] = idx;
    }
    const int C = static_cast<int>(splits.size());
    const int center = split_of[0];

    // Reference simulations per (split, n_high), R + 1 replicates each.
    std::map<std::pair<int, int>, std::vector<Contingency>> refs;
    auto ref = [&](int c, int nh) -> const std::vector<Contingency>& {
        auto key = std::make_pair(c, nh);
        auto it = refs.find(key);
        if (it == refs.end()) it = refs.emplace(key, sim_batch(splits[c], beta, nh, 0, R + 1, cb, seed, exec)).first;
        return it->second;
    };

    TwoStageRow row;
    row.beta = beta;
    row.s_obs = INFINITY;
    for (int c = 0; c < C; ++c) {
        const auto& Z = ref(c, n_obs);
        double s = 0;
        for (int r = 0; r < R; ++r) s += contingency_distance(obs, Z[r]);
        row.s_obs = std::min(row.s_obs, s / R);
    }

    std::vector<double> s_star(R, -INFINITY);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<Contingency> Y(R);
        std::vector<int> nr(R, n_obs);
        if (g == 0) {
            const auto& Z = ref(center, n_obs);
            for (int r = 0; r < R; ++r) Y[r] = Z[r];
        } else {
            EconomyConfig c = cb;
            c.set_theta(grid[g]);
            const GameSetup game = make_game(c, data.X, splits[split_of[g]], cache);
            const EquilibriumSolution eq = solve_fixed_point(game, Exec::serial);
            if (!eq.converged) throw NumericalError("two-stage: equilibrium did not converge");
            const std::uint64_t th = hash_vector(grid[g]);
            for (int r = 0; r < R; ++r) {
                Rng rng = make_rng(seed, Stream::two_stage, bits(beta), th, static_cast<std::uint64_t>(r));
                const Education Ht = sample_actions(eq.psi_star, rng);
                nr[r] = static_cast<int>(std::count(Ht.begin(), Ht.end(), 1));
                Y[r] = simulate_contingency(nr[r], splits[split_of[g]], c, rng);
            }
        }
        for (int r = 0; r < R; ++r) {
            double inner = INFINITY;
            for (int c = 0; c < C; ++c) {
                double s = 0;
                if (g == 0) {
                    // Same pool as the observed statistic: the other R - 1
                    // replicates plus the observation itself when it was
                    // generated under this split, else one extra replicate.
                    const auto& Z = ref(c, n_obs);
                    for (int q = 0; q < R; ++q)
                        if (q != r) s += contingency_distance(Y[r], Z[q]);
                    s += contingency_distance(Y[r], c == center ? obs : Z[R]);
                } else {
                    const auto& Z = ref(c, nr[r]);
                    for (int q = 0; q < R; ++q) s += contingency_distance(Y[r], Z[q]);
                }
                inner = std::min(inner, s / R);
            }
            s_star[r] = std::max(s_star[r], inner);
        }
    }
    (void)n;
    row.critical = mc_critical(s_star, alpha);
    row.status = row.s_obs <= row.critical ? 1 : 0;
    return row;
}

TwoStageResult two_stage_beta(const ObservedData& data, const EconomyConfig& cfg, const std::vector<double>& grid,
                              const TwoStageOptions& opt, std::uint64_t seed, Exec exec) {
    if (grid.empty()) throw std::invalid_argument("two_stage_beta: empty beta grid");
    TwoStageResult out;
    out.region.kind = RegionKind::two_stage;
    out.region.level = 1 - opt.alpha;
    BlockCache cache(MatchSettings::from(cfg, derive_seed(seed, Stream::beta_bank)));
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double b = grid[gi];
        TwoStageRow row;
        row.beta = b;
        try {
            std::vector<std::vector<double>> tg;
            double a2 = opt.alpha / 2;
            if (opt.oracle_theta) {
                tg = {*opt.oracle_theta};
                a2 = opt.alpha;
                row.box_lo = row.box_hi = *opt.oracle_theta;
            } else {
                EstimateOptions eo = opt.first_stage.estimate;
                if (eo.split_rule == EstimateOptions::SplitRule::matched) eo.matching = data.table(cfg.n_types());
                const ThetaEstimate est = estimate_theta(b, data.H, data.X, cfg, cache, eo);
                BootstrapOptions bo = opt.first_stage;
                bo.alpha = opt.alpha / 2;
                const BootstrapResult br =
                    bootstrap_theta_ci(est.theta, b, data.X, cfg, cache, bo, seed, splitmix64(bits(b)), exec);
                row.box_lo = br.region.box_lo;
                row.box_hi = br.region.box_hi;
                Rng rng = make_rng(seed, Stream::two_stage, bits(b), 0x15ULL);
                tg = theta_grid(est.theta, row.box_lo, row.box_hi, opt.lhs_points, rng);
            }
            const TwoStageRow r = two_stage_at(data, b, tg, cfg, cache, opt.R, a2, seed, exec);
            row.s_obs = r.s_obs;
            row.critical = r.critical;
            row.status = r.status;
        } catch (const NumericalError& e) {
            row.status = -1;
            row.note = e.what();
        }
        out.rows.push_back(row);
        out.region.grid.push_back(b);
        out.region.status.push_back(row.status);
    }
    return out;
}

void write_beta_csv(std::ostream& os, const BetaInversion& r) {
    os << "beta,t_obs,critical,accepted\n";
    os.precision(10);
    for (const auto& t : r.tests) os << t.beta << ',' << t.t_obs << ',' << t.critical << ',' << (t.reject ? 0 : 1) << '\n';
}

void write_two_stage_csv(std::ostream& os, const TwoStageResult& r) {
    os << "beta,t_obs,critical,accepted\n";
    os.precision(10);
    for (const auto& row : r.rows) {
        os << row.beta << ',';
        if (row.status < 0) os << "NA,NA,undetermined\n";
        else os << row.s_obs << ',' << row.critical << ',' << row.status << '\n';
    }
}

} // namespace labmatch
