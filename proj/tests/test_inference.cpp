#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "labmatch/experiments.hpp"
#include "labmatch/inference.hpp"

using namespace labmatch;

namespace {

EconomyConfig table_cfg(double beta, int n, int spec = 0) {
    EconomyConfig c = table_economy(table_specs()[spec], beta, n);
    c.beta_draws = 300;
    return c;
}

struct Fixture {
    EconomyConfig cfg;
    BlockCache cache;
    SimulatedData sd;

    Fixture(double beta, int n, std::uint64_t seed, int spec = 0)
        : cfg(table_cfg(beta, n, spec)), cache(MatchSettings::from(cfg, 11)), sd(simulate_data(cfg, cache, seed, 0)) {}
};

} // namespace

TEST_CASE("cached likelihood equals the from-scratch computation") {
    for (int spec : {0, 1, 2, 3}) {
        Fixture f(1.5, 200, 3, spec);
        const Likelihood L(f.cfg, f.cache, f.sd.data.H, f.sd.data.X, 1.5);
        std::set<std::uint64_t> masks;
        for (double t1 : {0.2, 0.8, 1.0, 2.5, 6.0})
            for (double t2 : {-0.5, 0.5, 1.0, 1.7}) {
                const std::vector<double> th{t1, t2};
                CHECK(L(th) == doctest::Approx(L.from_scratch(th)).epsilon(1e-10));
                masks.insert(L.mask_at(th));
                CHECK(L.evaluate(th).mask == L.mask_at(th));
            }
        CHECK(!masks.empty());
    }
}

TEST_CASE("likelihood carries the logit form") {
    Fixture f(1.0, 300, 4);
    const Likelihood L(f.cfg, f.cache, f.sd.data.H, f.sd.data.X, 1.0);
    const std::vector<double> th{1.3, 0.9};
    const LikelihoodEvaluation ev = L.evaluate(th, true);
    REQUIRE(ev.phat.size() == 300u);
    double ll = 0;
    for (int i = 0; i < 300; ++i) {
        CHECK((ev.phat[i] > 0 && ev.phat[i] < 1));
        ll += f.sd.data.H[i] ? std::log(ev.phat[i]) : std::log(1 - ev.phat[i]);
    }
    CHECK(ev.loglik == doctest::Approx(ll).epsilon(1e-10));
    CHECK(neg_loglik(L, th) == doctest::Approx(-ll).epsilon(1e-10));
    CHECK(L.p_hat() == doctest::Approx(double(f.sd.data.n_high()) / 300));
    CHECK_THROWS_AS(L(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("theta1 ranges reproduce their preference split") {
    Fixture f(2.0, 200, 5);
    const Likelihood L(f.cfg, f.cache, f.sd.data.H, f.sd.data.X, 2.0);
    const auto masks = L.candidate_masks();
    CHECK(masks.front() == 3u);
    int reachable = 0;
    for (std::uint64_t m : masks) {
        const auto [lo, hi] = L.theta1_range(m, {1.0});
        if (!(lo < hi)) continue;
        ++reachable;
        const double t1 = std::isinf(hi) ? lo + 1 : 0.5 * (lo + hi);
        CHECK(L.mask_at({t1, 1.0}) == m);
    }
    CHECK(reachable >= 2);
}

TEST_CASE("estimation refuses single-level data") {
    EconomyConfig c = table_cfg(1.0, 50);
    BlockCache cache(MatchSettings::from(c, 1));
    const Matrix X = draw_workers(c, 1, 0).covariates;
    CHECK_THROWS_AS(estimate_theta(1.0, Education(50, 1), X, c, cache), DegenerateData);
    CHECK_THROWS_AS(estimate_theta(1.0, Education(50, 0), X, c, cache), DegenerateData);
}

TEST_CASE("maximum satisfies the first-order conditions") {
    Fixture f(1.0, 500, 6);
    EstimateOptions opt;
    const ThetaEstimate est = estimate_theta(1.0, f.sd.data.H, f.sd.data.X, f.cfg, f.cache, opt);
    const Likelihood L(f.cfg, f.cache, f.sd.data.H, f.sd.data.X, 1.0);
    CHECK(L(est.theta) == doctest::Approx(est.loglik).epsilon(1e-12));
    // Within the estimated split theta1 enters delta linearly with a common
    // coefficient, so the score in theta1 is zero iff mean phat = p_hat.
    const LikelihoodEvaluation ev = L.evaluate(est.theta, true);
    REQUIRE(ev.mask == est.mask);
    const double mp = std::accumulate(ev.phat.begin(), ev.phat.end(), 0.0) / ev.phat.size();
    CHECK(std::abs(mp - L.p_hat()) < 1e-4);
    // No nearby point within the split does better.
    for (double d1 : {-0.02, 0.02})
        for (double d2 : {-0.02, 0.02}) {
            const std::vector<double> t{est.theta[0] + d1, est.theta[1] + d2};
            if (L.mask_at(t) == est.mask) CHECK(L(t) <= est.loglik + 1e-9);
        }
    // The global maximum is at least as good as the best per-split optimum.
    for (const auto& pc : est.per_case)
        if (pc.feasible) CHECK(pc.loglik <= est.loglik + 1e-12);
}

TEST_CASE("estimates recover theta0 on average") {
    double s1 = 0, s2 = 0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
        Fixture f(1.0, 1000, 100 + r);
        EstimateOptions opt;
        opt.split_rule = EstimateOptions::SplitRule::matched;
        opt.matching = f.sd.data.table(2);
        const ThetaEstimate est = estimate_theta(1.0, f.sd.data.H, f.sd.data.X, f.cfg, f.cache, opt);
        s1 += est.theta[0] / reps;
        s2 += est.theta[1] / reps;
    }
    CHECK(std::abs(s1 - 1.0) < 0.3);
    CHECK(std::abs(s2 - 1.0) < 0.3);
}

TEST_CASE("fixed components stay at their start") {
    Fixture f(1.0, 300, 7);
    EstimateOptions opt;
    opt.start = {1.0, 1.0};
    opt.fixed = {false, true};
    const ThetaEstimate est = estimate_theta(1.0, f.sd.data.H, f.sd.data.X, f.cfg, f.cache, opt);
    CHECK(est.theta[1] == 1.0);
    opt.search = EstimateOptions::Search::local;
    const ThetaEstimate loc = estimate_theta(1.0, f.sd.data.H, f.sd.data.X, f.cfg, f.cache, opt);
    CHECK(loc.theta[1] == 1.0);
    CHECK(loc.loglik <= est.loglik + 1e-6);
    EstimateOptions bad;
    bad.split_rule = EstimateOptions::SplitRule::matched;
    CHECK_THROWS_AS(estimate_theta(1.0, f.sd.data.H, f.sd.data.X, f.cfg, f.cache, bad), std::invalid_argument);
}

TEST_CASE("empirical quantile uses the ceil(qn)-th order statistic") {
    std::vector<double> v(10);
    std::iota(v.begin(), v.end(), 1.0);
    std::reverse(v.begin(), v.end());
    CHECK(empirical_quantile(v, 0.5) == 5.0);
    CHECK(empirical_quantile(v, 0.51) == 6.0);
    CHECK(empirical_quantile(v, 0.025) == 1.0);
    CHECK(empirical_quantile(v, 0.975) == 10.0);
    CHECK(empirical_quantile(v, 0.0) == 1.0);
    CHECK(empirical_quantile(v, 1.0) == 10.0);
    CHECK_THROWS_AS(empirical_quantile({}, 0.5), std::invalid_argument);

    std::vector<double> t(99);
    std::iota(t.begin(), t.end(), 1.0);
    CHECK(mc_critical(t, 0.05) == 95.0);  // ceil(99 * 0.95) = 95
    CHECK(mc_critical(t, 0.10) == 90.0);
}

TEST_CASE("percentile interval and Bonferroni box from stored draws") {
    BootstrapResult r;
    for (int b = 1; b <= 200; ++b) {
        r.draws.push_back({double(b), -double(b)});
        r.contrast_values.push_back(0.5 * b);
    }
    const auto [lo, hi] = contrast_interval(r, 0.1);
    CHECK(lo == 5.0);    // 10th of 200
    CHECK(hi == 95.0);   // 190th
    std::vector<double> blo, bhi;
    bonferroni_box(r, 0.1, blo, bhi);
    // Tail alpha / (2 d) = 0.025 in each component.
    CHECK(blo[0] == 5.0);
    CHECK(bhi[0] == 195.0);
    CHECK(blo[1] == -196.0);
    CHECK(bhi[1] == -6.0);
}

TEST_CASE("bootstrap is reproducible across execution modes") {
    Fixture f(1.0, 150, 8);
    BootstrapOptions bo;
    bo.B = 16;
    bo.alpha = 0.1;
    bo.estimate.split_rule = EstimateOptions::SplitRule::matched;
    const auto a = bootstrap_theta_ci({1.0, 1.0}, 1.0, f.sd.data.X, f.cfg, f.cache, bo, 5, 9, Exec::serial);
    const auto b = bootstrap_theta_ci({1.0, 1.0}, 1.0, f.sd.data.X, f.cfg, f.cache, bo, 5, 9, Exec::parallel);
    CHECK(a.draws == b.draws);
    CHECK(a.region.contrast_lo == b.region.contrast_lo);
    CHECK(a.region.contrast_hi == b.region.contrast_hi);
    CHECK(a.region.contrast_lo <= a.region.contrast_hi);
    CHECK(a.region.box_lo.size() == 2u);
    for (std::size_t i = 0; i < a.draws.size(); ++i)
        CHECK(a.contrast_values[i] == doctest::Approx(a.draws[i][0] + a.draws[i][1]));
    const auto c = bootstrap_theta_ci({1.0, 1.0}, 1.0, f.sd.data.X, f.cfg, f.cache, bo, 5, 10, Exec::serial);
    CHECK(c.draws != a.draws);
}

TEST_CASE("contingency statistic and the Monte Carlo test") {
    Fixture f(2.0, 200, 9);
    const Contingency obs = f.sd.data.table(2);
    CHECK(contingency_statistic(obs, {obs, obs}) == 0.0);

    const auto r1 = mc_test(obs, f.sd.data.n_high(), f.sd.split, 2.0, f.cfg, 49, 0.05, 3, Exec::serial);
    const auto r2 = mc_test(obs, f.sd.data.n_high(), f.sd.split, 2.0, f.cfg, 49, 0.05, 3, Exec::parallel);
    CHECK(r1.t_obs == r2.t_obs);
    CHECK(r1.t_sims == r2.t_sims);
    CHECK(r1.t_sims.size() == 49u);
    CHECK(r1.critical == mc_critical(r1.t_sims, 0.05));
    CHECK(r1.reject == (r1.t_obs > r1.critical));
    // Replicates depend only on (beta, split, n_high, index).
    const Contingency s0 = sim_contingency(f.sd.split, 2.0, f.sd.data.n_high(), 4, f.cfg, 3);
    CHECK(s0.counts == sim_contingency(f.sd.split, 2.0, f.sd.data.n_high(), 4, f.cfg, 3).counts);

    // A table far from anything the model produces is rejected.
    Contingency far = obs;
    far.counts[1] = {0, f.sd.data.n_high()};
    far.counts[0] = {f.cfg.n_workers - f.sd.data.n_high(), 0};
    const auto r3 = mc_test(far, f.sd.data.n_high(), f.sd.split, 0.0, f.cfg, 49, 0.05, 3);
    CHECK(r3.reject);
}

TEST_CASE("inversion region over a beta grid") {
    Fixture f(2.0, 200, 10);
    const std::vector<double> grid{0.0, 2.0, 5.0};
    const BetaInversion inv = mc_confidence_beta(f.sd.data, f.cfg.theta(), f.cfg, grid, 39, 0.05, 2);
    CHECK(inv.region.grid == grid);
    CHECK(inv.tests.size() == 3u);
    for (std::size_t i = 0; i < 3; ++i) CHECK(inv.region.status[i] == (inv.tests[i].reject ? 0 : 1));
    CHECK(inv.region.accepted().size() <= 3u);
    CHECK_THROWS_AS(mc_confidence_beta(f.sd.data, f.cfg.theta(), f.cfg, {}, 39, 0.05, 2), std::invalid_argument);
}

TEST_CASE("known-theta two-stage reduces to the single-stage test") {
    Fixture f(1.0, 150, 12);
    const std::vector<double> grid{0.0, 1.0, 3.0};
    const BetaInversion inv = mc_confidence_beta(f.sd.data, f.cfg.theta(), f.cfg, grid, 39, 0.05, 4);
    TwoStageOptions opt;
    opt.R = 39;
    opt.oracle_theta = f.cfg.theta();
    const TwoStageResult ts = two_stage_beta(f.sd.data, f.cfg, grid, opt, 4);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(ts.rows[i].s_obs == doctest::Approx(inv.tests[i].t_obs).epsilon(1e-12));
        CHECK(ts.rows[i].critical == doctest::Approx(inv.tests[i].critical).epsilon(1e-12));
        CHECK(ts.region.status[i] == inv.region.status[i]);
    }
    CHECK_THROWS_AS(two_stage_beta(f.sd.data, f.cfg, {}, opt, 4), std::invalid_argument);
}

TEST_CASE("first-stage grid covers the box") {
    Rng rng(3);
    const std::vector<double> c{1.0, 2.0}, lo{0.5, 1.0}, hi{1.5, 4.0};
    const auto g = theta_grid(c, lo, hi, 8, rng);
    REQUIRE(g.size() == 1u + 4u + 1u + 8u);
    CHECK(g[0] == c);
    CHECK(g[5] == std::vector<double>{1.0, 2.5});
    for (const auto& t : g)
        for (int k = 0; k < 2; ++k) CHECK((t[k] >= lo[k] && t[k] <= hi[k]));
    // One Latin-hypercube point per stratum in every coordinate.
    for (int k = 0; k < 2; ++k) {
        std::set<int> strata;
        for (std::size_t i = 6; i < g.size(); ++i)
            strata.insert(static_cast<int>((g[i][k] - lo[k]) / (hi[k] - lo[k]) * 8));
        CHECK(strata.size() == 8u);
    }
}

TEST_CASE("full two-stage run returns a decision per beta") {
    Fixture f(1.0, 120, 13);
    TwoStageOptions opt;
    opt.R = 19;
    opt.lhs_points = 2;
    opt.first_stage.B = 20;
    opt.first_stage.max_fail_share = 0.5;
    opt.first_stage.estimate.split_rule = EstimateOptions::SplitRule::matched;
    const TwoStageResult ts = two_stage_beta(f.sd.data, f.cfg, {1.0}, opt, 7);
    REQUIRE(ts.rows.size() == 1u);
    CHECK(ts.rows[0].status >= -1);
    if (ts.rows[0].status >= 0) {
        CHECK(ts.rows[0].box_lo.size() == 2u);
        CHECK(ts.rows[0].status == (ts.rows[0].s_obs <= ts.rows[0].critical ? 1 : 0));
    }
}
