#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "labmatch/config.hpp"
#include "labmatch/model.hpp"

using namespace labmatch;

namespace {

EconomyConfig two_type(double theta1, ProductionForm f = ProductionForm::multiplicative) {
    EconomyConfig c;
    c.theta1 = theta1;
    c.production = f;
    c.capital_support = {0.5, 1.0};
    c.capital_mass = {0.5, 0.5};
    return c;
}

Matrix uniform_sample(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    Matrix X(n, d);
    for (double& v : X.data) v = U(rng);
    return X;
}

} // namespace

TEST_CASE("production forms") {
    CHECK(production(2, 0.5, 1.0, ProductionForm::multiplicative) == doctest::Approx(1.0));
    CHECK(production(1, 1, 1.0, ProductionForm::additive) == doctest::Approx(2.0));
    CHECK(production(2, 1, 3.0, ProductionForm::multiplicative) == doctest::Approx(6.0));
    // Strictly increasing in both arguments for theta1 > 0.
    for (auto f : {ProductionForm::multiplicative, ProductionForm::additive}) {
        CHECK(production(1.1, 1, 2.0, f) > production(1.0, 1, 2.0, f));
        CHECK(production(1, 1.1, 2.0, f) > production(1, 1.0, 2.0, f));
    }
}

TEST_CASE("outside option forms") {
    EconomyConfig c;
    c.covariate_dim = 2;
    c.theta2 = {1, 1};
    c.outside = OutsideForm::g1_exp_interaction;
    CHECK(outside_option(1, std::vector<double>{0, 0}, c) == doctest::Approx(1.0));
    CHECK(outside_option(1, std::vector<double>{1, 1}, c) == doctest::Approx(7.389056).epsilon(1e-7));
    c.outside = OutsideForm::g2_level_exp;
    CHECK(outside_option(2, std::vector<double>{0, 0}, c) == doctest::Approx(2.0));
    CHECK_THROWS_AS(outside_option(1, std::vector<double>{1, 1, 1}, c), std::invalid_argument);
}

TEST_CASE("Nash bargaining payoffs") {
    EconomyConfig c;
    c.tau = 0.5;
    // f = 4 via multiplicative theta1 = 4, h = k = 1.
    c.theta1 = 4;
    Payoffs p = bargain_payoffs(1, 1, 2.0, c);
    CHECK(p.wage == doctest::Approx(3.0));
    CHECK(p.profit == doctest::Approx(1.0));
    p = bargain_payoffs(1, 1, 4.0, c);
    CHECK(p.wage == doctest::Approx(4.0));
    CHECK(p.profit == doctest::Approx(0.0));
    c.theta1 = 10;
    p = bargain_payoffs(2, 1, 10.0, c);
    CHECK(p.wage == doctest::Approx(15.0));
    CHECK(p.profit == doctest::Approx(5.0));
}

TEST_CASE("wage plus profit equals output") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.01, 3);
    for (int t = 0; t < 2000; ++t) {
        EconomyConfig c;
        c.theta1 = U(rng);
        c.tau = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
        c.production = t % 2 ? ProductionForm::additive : ProductionForm::multiplicative;
        c.outside = t % 3 ? OutsideForm::g1_exp_interaction : OutsideForm::g2_level_exp;
        const double h = U(rng), k = U(rng);
        const std::vector<double> x{U(rng) - 1.5};
        const Payoffs p = bargain_payoffs(h, k, x, c);
        CHECK(std::abs(p.wage + p.profit - production(h, k, c)) <= 1e-12 * std::max(1.0, production(h, k, c)));
        CHECK(p.wage > 0);
    }
}

TEST_CASE("config validation lists every problem") {
    EconomyConfig c;
    CHECK(check(c).empty());
    c.capital_mass = {0.5, 0.4};
    c.capital_support = {1.0, 0.5};
    c.tau = 1.0;
    c.sigma = 0;
    c.theta1 = 0;
    const auto bad = check(c);
    CHECK(bad.size() == 5);
    CHECK_THROWS_AS(validate(c), ConfigError);
    try {
        validate(c);
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 5);
    }
    EconomyConfig d;
    d.capital_mass = {0.5};
    CHECK(!check(d).empty());
}

TEST_CASE("firm preference split: worked multiplicative example") {
    EconomyConfig c = two_type(10);
    c.h_low = 1;
    c.h_high = 2;
    c.covariate_dim = 2;
    c.theta2 = {1, 1};
    // Population means of exp(h x'theta2) for x uniform on the unit square.
    auto gt = [](double h) { return std::pow((std::exp(h) - 1) / h, 2); };
    CHECK(gt(1) == doctest::Approx(2.9525).epsilon(1e-4));
    CHECK(gt(2) == doctest::Approx(10.2050).epsilon(1e-4));
    FirmPreferenceSplit s = firm_preference_split(c, gt(1), gt(2));
    CHECK(s.prefers_high == std::vector<int>{1});
    CHECK(s.prefers_low == std::vector<int>{0});
    CHECK(s.q_high == doctest::Approx(0.5));

    // The same split from a large sample, whose means converge to the above.
    const Matrix X = uniform_sample(200000, 2, 5);
    const OutsideValues o = outside_values(X, c);
    CHECK(o.mean_low == doctest::Approx(gt(1)).epsilon(0.01));
    CHECK(o.mean_high == doctest::Approx(gt(2)).epsilon(0.01));
    s = firm_preference_split(c, X);
    CHECK(s.prefers_high == std::vector<int>{1});
    CHECK(s.posterior_high == std::vector<double>{1.0});
}

TEST_CASE("additive production never splits the firm types") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int t = 0; t < 500; ++t) {
        EconomyConfig c = two_type(std::exp(U(rng)), ProductionForm::additive);
        c.capital_support = {0.3, 0.7, 1.4};
        c.capital_mass = {0.2, 0.3, 0.5};
        const double gl = std::exp(U(rng)), gh = std::exp(U(rng));
        const auto s = firm_preference_split(c, gl, gh);
        CHECK((s.prefers_high.empty() || s.prefers_low.empty()));
    }
}

TEST_CASE("multiplicative prefers_high is an upper set") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0, 2);
    for (int t = 0; t < 500; ++t) {
        EconomyConfig c = two_type(U(rng) + 0.01);
        c.capital_support = {0.2, 0.5, 0.9, 1.3};
        c.capital_mass = {0.25, 0.25, 0.25, 0.25};
        const auto s = firm_preference_split(c, U(rng), U(rng) + U(rng));
        CHECK(upward_closed(s, 4));
        double tot = 0;
        for (double w : s.posterior_high) tot += w;
        if (!s.posterior_high.empty()) CHECK(tot == doctest::Approx(1.0));
    }
}

TEST_CASE("ties go to the high-preferring set") {
    EconomyConfig c = two_type(1);
    // rho_high - rho_low = (1 - tau)(k - (gh - gl)); tie at k = 1.
    const auto s = firm_preference_split(c, 1.0, 2.0);
    CHECK(s.high(1));
    CHECK(!s.high(0));
}

TEST_CASE("split depends on the covariate sample only through its mean") {
    EconomyConfig c = two_type(2.5);
    c.theta2 = {0.8};
    Matrix X = uniform_sample(301, 1, 9);
    const auto a = firm_preference_split(c, X);
    std::mt19937_64 rng(1);
    std::shuffle(X.data.begin(), X.data.end(), rng);
    const auto b = firm_preference_split(c, X);
    CHECK(a.mask == b.mask);
    CHECK_THROWS(firm_preference_split(c, Matrix(0, 1)));
}

TEST_CASE("participation report flags negative profit matches") {
    EconomyConfig c = two_type(1);
    c.h_low = 1;
    c.h_high = 2;
    c.theta2 = {1};
    Matrix X(1, 1);
    X(0, 0) = 2.0;  // g = exp(2 h) dwarfs f
    const IrReport r = ir_report(c, X);
    CHECK(r.checked == 4);
    CHECK(r.violations == 4);
    CHECK(!r.ok());
    CHECK(r.worst_gap < 0);
    X(0, 0) = -5.0;
    c.theta1 = 10;
    CHECK(ir_report(c, X).ok());
}

TEST_CASE("worker draws are reproducible per replication") {
    EconomyConfig c;
    c.covariate_dim = 3;
    c.theta2 = {1, 1, 1};
    c.covariate_low = -1;
    c.covariate_high = 2;
    const auto a = draw_workers(c, 42, 3);
    const auto b = draw_workers(c, 42, 3);
    const auto d = draw_workers(c, 42, 4);
    CHECK(a.covariates.data == b.covariates.data);
    CHECK(a.covariates.data != d.covariates.data);
    CHECK(a.size() == c.n_workers);
    for (double v : a.covariates.data) CHECK((v > -1 && v < 2));
}
