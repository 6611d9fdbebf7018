#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "labmatch/csv.hpp"
#include "labmatch/experiments.hpp"

using namespace labmatch;

namespace {

const char* kMinimal = R"({
  // comment lines are allowed
  "economy": {
    "n_workers": 60, "n_firms": 60, "edu_levels": [0, 1],
    "capital_support": [0.5, 1.0], "capital_mass": [0.5, 0.5],
    "covariate_dim": 1, "covariate_range": [0, 1]
  },
  "parameters": { "theta1": 1.5, "theta2": [0.8], "beta": 1.0, "sigma": 1.0, "tau": 0.5 },
  "forms": { "production": "additive", "outside": "g2_level_exp" }
})";

std::vector<std::string> problems_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& s) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& p) { return p.find(s) != std::string::npos; });
}

} // namespace

TEST_CASE("config parsing fills every field") {
    const RunConfig rc = parse_config(kMinimal);
    const EconomyConfig& c = rc.economy;
    CHECK(c.n_workers == 60);
    CHECK(c.theta1 == 1.5);
    CHECK(c.theta2 == std::vector<double>{0.8});
    CHECK(c.production == ProductionForm::additive);
    CHECK(c.outside == OutsideForm::g2_level_exp);
    CHECK(c.h_low == 0.0);
    CHECK(c.h_high == 1.0);
    // Optional sections fall back to the defaults.
    CHECK(c.beta_draws == EconomyConfig{}.beta_draws);
    CHECK(rc.inference.R == 99);
    CHECK(rc.inference.split_rule == EstimateOptions::SplitRule::matched);
    CHECK(!rc.inference.beta_grid);
    CHECK(rc.hash.size() == 16u);
}

TEST_CASE("canonical dump round-trips") {
    RunConfig rc = parse_config(kMinimal);
    rc.inference.beta_grid = std::vector<double>{0, 1.5, 3};
    rc.inference.oracle_theta = true;
    rc.economy.capital_draw = CapitalDraw::exact_counts;
    rc.economy.solver.damping = 0.3;
    const std::string d = dump_config(rc);
    const RunConfig back = parse_config(d);
    CHECK(dump_config(back) == d);
    CHECK(back.inference.beta_grid == rc.inference.beta_grid);
    CHECK(back.inference.oracle_theta);
    CHECK(back.economy.capital_draw == CapitalDraw::exact_counts);
    CHECK(back.economy.solver.damping == 0.3);
    CHECK(parse_config(dump_config(default_run_config())).hash == parse_config(dump_config(default_run_config())).hash);
    CHECK(back.hash != parse_config(kMinimal).hash);
}

TEST_CASE("config errors are collected together") {
    std::string t = kMinimal;
    t.replace(t.find("\"n_firms\": 60"), 13, "\"bogus\": 1");
    t.replace(t.find("\"additive\""), 10, "\"cubic\"");
    t.replace(t.find("\"tau\": 0.5"), 10, "\"tau\": \"x\"");
    const auto p = problems_of(t);
    CHECK(mentions(p, "unknown key 'economy.bogus'"));
    CHECK(mentions(p, "missing key 'economy.n_firms'"));
    CHECK(mentions(p, "forms.production"));
    CHECK(mentions(p, "parameters.tau"));
    CHECK(p.size() >= 4u);

    CHECK(mentions(problems_of("{}"), "missing section 'economy'"));
    CHECK(mentions(problems_of("{ not json"), ""));
    CHECK(!problems_of("{ not json").empty());

    std::string inv = kMinimal;
    inv.replace(inv.find("[0.5, 0.5]"), 10, "[0.5, 0.7]");
    CHECK(!problems_of(inv).empty());

    std::string extra = kMinimal;
    extra.insert(extra.rfind('}'), ", \"inference\": { \"alpha\": 1.5, \"beta_grid\": [] }, \"plots\": {}");
    const auto q = problems_of(extra);
    CHECK(mentions(q, "plots"));
    CHECK(mentions(q, "alpha"));
    // An empty grid parses; commands that need a grid reject it at run time.
    CHECK(!mentions(q, "beta_grid"));
}

TEST_CASE("outcome csv round trip") {
    EconomyConfig c = parse_config(kMinimal).economy;
    c.covariate_dim = 2;
    c.theta2 = {0.5, -0.5};
    BlockCache cache(MatchSettings::from(c, 1));
    SimulatedData sd = simulate_data(c, cache, 4, 0);
    std::ostringstream os;
    write_outcome_csv(os, sd.outcome, sd.data.H, sd.data.X, "abc");
    CHECK(os.str().rfind("# labmatch " + std::string(kVersion) + " config=abc\n", 0) == 0);
    std::istringstream is(os.str());
    const ObservedData back = read_outcome_csv(is, 2);
    CHECK(back.H == sd.data.H);
    CHECK(back.matched_type == sd.data.matched_type);
    REQUIRE(back.X.cols == 2);
    for (std::size_t i = 0; i < back.X.data.size(); ++i)
        CHECK(back.X.data[i] == doctest::Approx(sd.data.X.data[i]).epsilon(1e-12));
}

TEST_CASE("outcome csv errors carry line numbers") {
    auto line_of = [](const std::string& text) {
        std::istringstream is(text);
        try {
            read_outcome_csv(is, 2);
        } catch (const CsvError& e) {
            return e.line();
        }
        return 0;
    };
    const std::string head = "# labmatch 1.0.0 config=x\nworker,education,matched_type,x1\n";
    CHECK(line_of(head + "0,1,0,0.5\n1,2,0,0.5\n") == 4);
    CHECK(line_of(head + "0,1,0,0.5\n1,1,5,0.5\n") == 4);
    CHECK(line_of(head + "0,1,0\n") == 3);
    CHECK(line_of(head + "0,1,0,abc\n") == 3);
    CHECK(line_of("worker,education\n0,1\n") == 1);
    CHECK(line_of(head) > 0);
    std::istringstream ok(head + "0,1,0,0.5\n1,0,1,0.25\n");
    const ObservedData d = read_outcome_csv(ok, 2);
    CHECK(d.size() == 2);
    CHECK(d.X(1, 0) == 0.25);
    CHECK_THROWS_AS(read_outcome_csv(std::string("/nonexistent/file.csv"), 2), std::runtime_error);
}

TEST_CASE("table economies") {
    const auto specs = table_specs();
    REQUIRE(specs.size() == 4u);
    CHECK(specs[0].name == "g1f1");
    for (const auto& s : specs) {
        const EconomyConfig c = table_economy(s, 2.0, 250);
        CHECK(c.n_workers == 250);
        CHECK(c.n_firms == 250);
        CHECK(c.beta == 2.0);
        CHECK(c.theta() == std::vector<double>{1.0, 1.0});
        CHECK(c.h_low == 0.0);
        CHECK(c.h_high == 1.0);
        CHECK(c.production == s.production);
        CHECK(c.outside == s.outside);
        CHECK(check(c).empty());
    }
}

TEST_CASE("simulated data is reproducible") {
    const EconomyConfig c = table_economy(table_specs()[1], 1.0, 120);
    BlockCache cache(MatchSettings::from(c, 2));
    const SimulatedData a = simulate_data(c, cache, 3, 1, Exec::serial);
    const SimulatedData b = simulate_data(c, cache, 3, 1, Exec::parallel);
    const SimulatedData d = simulate_data(c, cache, 3, 2);
    CHECK(a.data.H == b.data.H);
    CHECK(a.data.matched_type == b.data.matched_type);
    CHECK(a.outcome.wages == b.outcome.wages);
    CHECK(a.data.X.data != d.data.X.data);
    CHECK(a.eq.converged);
    CHECK(dictatorship_consistent(a.outcome, a.data.H, a.split));
}

TEST_CASE("figure presets and determinism") {
    const auto cases = figure_cases();
    REQUIRE(cases.size() == 6u);
    CHECK(cases[0].cfg.theta1 == 3.0);
    CHECK(cases[2].cfg.production == ProductionForm::additive);
    const auto grid = figure_beta_grid();
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 5.0);
    CHECK(default_inversion_grid().size() == 21u);

    FigureCase fc = cases[0];
    fc.cfg.n_workers = fc.cfg.n_firms = 60;
    fc.cfg.beta_draws = 50;
    BlockCache c1(MatchSettings::from(fc.cfg, 1)), c2(MatchSettings::from(fc.cfg, 1));
    const FigurePoint a = figure_point(fc, 2.0, 6, 9, c1, Exec::serial);
    const FigurePoint b = figure_point(fc, 2.0, 6, 9, c2, Exec::parallel);
    CHECK(a.p_star == b.p_star);
    CHECK(a.gini == b.gini);
    CHECK(a.sort_corr == b.sort_corr);
    CHECK(a.reps == 6);
    CHECK((a.p_star > 0 && a.p_star < 1));

    std::ostringstream os;
    write_figure_csv(os, {a}, "h");
    CHECK(os.str().find("figure,theta_case,theta1,beta,p_star") != std::string::npos);
}

TEST_CASE("a small coverage cell") {
    const TableSpec spec = table_specs()[0];
    EconomyConfig c = table_economy(spec, 1.0, 100);
    c.beta_draws = 50;
    InferenceSettings inf;
    const TableCell a = table_cell(spec, c, 3, 10, inf, 5, Exec::serial);
    const TableCell b = table_cell(spec, c, 3, 10, inf, 5, Exec::parallel);
    CHECK(a.completed + static_cast<int>(a.errors.size()) == 3);
    CHECK(a.lengths == b.lengths);
    CHECK(a.covered == b.covered);
    for (double l : a.lengths) CHECK(l >= 0);
    std::ostringstream os;
    write_table_csv(os, {a}, "h");
    CHECK(os.str().find("spec,beta0,n,sims,bootstrap,completed,coverage,mean_length") != std::string::npos);
}

TEST_CASE("drivers write their files") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "labmatch_test_drivers";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "c.json";
    std::ofstream(cfg) << kMinimal;

    ExperimentPlan plan;
    plan.config_path = cfg.string();
    plan.output_dir = dir.string();
    plan.kind = ExperimentPlan::Kind::simulate;
    const auto files = run_simulate(plan);
    CHECK(fs::exists(dir / "data.csv"));
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(!files.empty());

    plan.data_path = (dir / "data.csv").string();
    plan.replications = 5;
    run_estimate(plan);
    std::ifstream est(dir / "estimate.csv");
    std::string first, second;
    std::getline(est, first);
    std::getline(est, second);
    CHECK(first.rfind("# labmatch", 0) == 0);
    CHECK(second == "parameter,estimate,ci_lo,ci_hi");

    plan.data_path = (dir / "missing.csv").string();
    CHECK_THROWS(run_estimate(plan));
    fs::remove_all(dir);
}
