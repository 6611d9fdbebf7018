#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "labmatch/matchprob.hpp"
#include "oracles.hpp"

using namespace labmatch;

namespace {

MatchSettings small_settings(int n, int draws = 20000) {
    MatchSettings s;
    s.n = n;
    s.capital = {0.5, 1.0};
    s.mass = {0.5, 0.5};
    s.beta_draws = draws;
    s.draw_seed = 7;
    return s;
}

} // namespace

TEST_CASE("binomial pmf and its derivative") {
    for (int n : {0, 1, 5, 40}) {
        for (double p : {0.0, 0.1, 0.5, 0.93, 1.0}) {
            double tot = 0;
            for (int x = 0; x <= n; ++x) {
                const double b = binomial_pmf(x, n, p);
                tot += b;
                if (p > 0 && p < 1) CHECK(b == doctest::Approx(oracle::binomial_pmf_logsum(x, n, p)).epsilon(1e-10));
            }
            CHECK(tot == doctest::Approx(1.0));
        }
    }
    const double h = 1e-6;
    for (int x = 0; x <= 12; ++x) {
        const double fd = (binomial_pmf(x, 12, 0.3 + h) - binomial_pmf(x, 12, 0.3 - h)) / (2 * h);
        CHECK(binomial_pmf_dp(x, 12, 0.3) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(binomial_pmf(-1, 5, 0.5) == 0.0);
    CHECK(binomial_pmf(6, 5, 0.5) == 0.0);
}

TEST_CASE("support grids partition the lattice") {
    for (int max : {0, 1, 7, 100, 999}) {
        for (int k : {1, 2, 3, 10, 25}) {
            const SupportGrid g = make_support_grid(max, k);
            REQUIRE(g.size() >= 1);
            CHECK(g.cell_lo.front() == 0);
            CHECK(g.cell_hi.back() == max);
            for (int i = 0; i < g.size(); ++i) {
                CHECK(g.cell_lo[i] <= g.nodes[i]);
                CHECK(g.nodes[i] <= g.cell_hi[i]);
                if (i) CHECK(g.cell_lo[i] == g.cell_hi[i - 1] + 1);
            }
            const auto w = cell_weights(g, max, 0.37);
            CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
            const auto dw = cell_weight_derivs(g, max, 0.37);
            CHECK(std::accumulate(dw.begin(), dw.end(), 0.0) == doctest::Approx(0.0).epsilon(1e-9));
            const double h = 1e-6;
            const auto wp = cell_weights(g, max, 0.37 + h), wm = cell_weights(g, max, 0.37 - h);
            for (int i = 0; i < g.size(); ++i)
                CHECK(dw[i] == doctest::Approx((wp[i] - wm[i]) / (2 * h)).epsilon(1e-5));
        }
    }
    CHECK(default_node_count(1000, 0) == 20);
    CHECK(default_node_count(250, 0) == 10);
    CHECK(default_node_count(4, 0) == 10);
    CHECK(make_support_grid(3, 10).size() == 4);  // at most one node per support point
    CHECK(default_node_count(500, 7) == 7);
}

TEST_CASE("random matching at beta = 0 gives the capital mass") {
    const MatchSettings s = small_settings(30, 200);
    for (std::uint64_t mask : {0ULL, 3ULL}) {
        const auto split = split_from_mask(mask, s.mass);
        for (int j = 0; j < 2; ++j)
            for (int nj : {0, 5, 29}) {
                const auto d = conditional_match_dist(j, nj, j == int(mask & 1) ? 30 : 0, split, 0.0, s);
                CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-9));
                CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-9));
            }
    }
}

TEST_CASE("conditional distributions sum to one in every regime") {
    const MatchSettings s = small_settings(12, 500);
    for (std::uint64_t mask : {0ULL, 1ULL, 2ULL, 3ULL}) {
        const auto split = split_from_mask(mask, s.mass);
        for (int j = 0; j < 2; ++j)
            for (int nj = 0; nj < 12; ++nj)
                for (int np = 0; np <= 12; ++np) {
                    const auto d = conditional_match_dist(j, nj, np, split, 1.5, s);
                    CHECK(d[0] + d[1] == doctest::Approx(1.0));
                    CHECK(d[0] >= -1e-12);
                    CHECK(d[1] >= -1e-12);
                    CHECK(conditional_match_prob(1, j, nj, np, split, 1.5, s) == doctest::Approx(d[1]));
                }
    }
}

TEST_CASE("three-firm economies against exact enumeration") {
    // Mixing the conditional distribution over Binomial(n, q_j) preferring
    // firms reproduces the exhaustive average over firm types and orderings.
    const MatchSettings s = small_settings(3, 40000);
    for (std::uint64_t mask : {0ULL, 2ULL, 3ULL}) {
        const auto split = split_from_mask(mask, s.mass);
        for (double beta : {0.0, 1.0, 3.0}) {
            oracle::Economy e{3, s.capital, s.mass, {bool(mask & 1), bool(mask & 2)}, beta};
            for (const std::array<int, 3> H : {std::array<int, 3>{1, 0, 0}, {1, 1, 0}, {0, 1, 1}, {1, 1, 1}}) {
                const std::vector<double> exact = oracle::exhaustive_match3(e, H);
                const int j = H[0];
                const int nj = (H[1] == j) + (H[2] == j);
                std::vector<double> lib(2, 0.0);
                for (int np = 0; np <= 3; ++np) {
                    const double w = binomial_pmf(np, 3, split.q_pref(j));
                    const auto d = conditional_match_dist(j, nj, np, split, beta, s);
                    lib[0] += w * d[0];
                    lib[1] += w * d[1];
                }
                CAPTURE(mask);
                CAPTURE(beta);
                CAPTURE(j);
                CAPTURE(nj);
                CHECK(lib[0] == doctest::Approx(exact[0]).epsilon(0.006));
                CHECK(lib[1] == doctest::Approx(exact[1]).epsilon(0.006));
            }
        }
    }
}

TEST_CASE("pi table against brute-force serial dictatorship") {
    const MatchSettings s = small_settings(4, 20000);
    const auto split = split_from_mask(2, s.mass);  // only k = 1 prefers high
    const MatchProbBlock block = build_block(split, 1.0, s);
    const MatchProbTable t = pi_table(block, 0.5);
    oracle::Economy e{4, s.capital, s.mass, {false, true}, 1.0};
    const auto bf = oracle::brute_force_pi(e, 0.5, 300000, 3);
    for (int j = 0; j < 2; ++j)
        for (int m = 0; m < 2; ++m) CHECK(std::abs(t.pi[j][m] - bf[j][m]) < 0.01);
    for (int j = 0; j < 2; ++j) CHECK(t.pi[j][0] + t.pi[j][1] == doctest::Approx(1.0));
}

TEST_CASE("exclusive and inclusive thresholds differ") {
    MatchSettings a = small_settings(6, 4000), b = a;
    b.convention = OrderStatConvention::inclusive;
    const auto split = split_from_mask(3, a.mass);
    const auto da = conditional_match_dist(1, 2, 5, split, 2.0, a);
    const auto db = conditional_match_dist(1, 2, 5, split, 2.0, b);
    CHECK(std::abs(da[1] - db[1]) > 1e-3);
}

TEST_CASE("block derivative in p matches finite differences") {
    MatchSettings s = small_settings(60, 300);
    const auto split = split_from_mask(2, s.mass);
    const MatchProbBlock block = build_block(split, 2.0, s);
    const auto d = pi_table_dp(block, 0.4);
    const double h = 1e-6;
    const auto tp = pi_table(block, 0.4 + h), tm = pi_table(block, 0.4 - h);
    for (int j = 0; j < 2; ++j)
        for (int m = 0; m < 2; ++m)
            CHECK(d[j][m] == doctest::Approx((tp.pi[j][m] - tm.pi[j][m]) / (2 * h)).epsilon(1e-4).scale(1));
}

TEST_CASE("pi increases in beta for the high type among high-preferring firms") {
    const MatchSettings s = small_settings(40, 2000);
    const auto split = split_from_mask(3, s.mass);
    double prev = 0;
    for (double beta : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        const double v = pi_table(build_block(split, beta, s), 0.3).pi[1][1];
        CHECK(v >= prev - 1e-9);
        prev = v;
    }
}

TEST_CASE("serial and parallel blocks are identical and cached") {
    const MatchSettings s = small_settings(120, 200);
    const auto split = split_from_mask(2, s.mass);
    const MatchProbBlock a = build_block(split, 1.3, s, Exec::serial);
    const MatchProbBlock b = build_block(split, 1.3, s, Exec::parallel);
    CHECK(a.prob[0] == b.prob[0]);
    CHECK(a.prob[1] == b.prob[1]);

    BlockCache cache(s);
    const auto p1 = cache.get(split, 1.3);
    const auto p2 = cache.get(split, 1.3);
    CHECK(p1.get() == p2.get());
    CHECK(p1->prob[1] == a.prob[1]);
    cache.get(split, 1.4);
    cache.get(split_from_mask(3, s.mass), 1.3);
    CHECK(cache.size() == 3);
}

TEST_CASE("expected production and csv output") {
    EconomyConfig cfg;
    cfg.n_workers = cfg.n_firms = 20;
    cfg.theta1 = 2;
    cfg.beta_draws = 200;
    const auto t = pi_table(split_from_mask(3, cfg.capital_mass), 0.6, cfg, 1);
    const double ref = t.pi[1][0] * 2 * 1 * 0.5 + t.pi[1][1] * 2 * 1 * 1.0;
    CHECK(expected_production(1, t, cfg) == doctest::Approx(ref));
    std::ostringstream os;
    write_pi_csv(os, t);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    std::getline(is, line);
    CHECK(line == "edu_level,capital_type,pi");
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 4);
}
