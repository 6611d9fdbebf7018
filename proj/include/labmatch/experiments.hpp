#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "labmatch/config.hpp"
#include "labmatch/exec.hpp"
#include "labmatch/inference.hpp"

namespace labmatch {

struct InferenceSettings {
    int R = 99;
    double alpha = 0.05;
    int bootstrap = 200;
    int lhs_points = 8;
    std::optional<std::vector<double>> beta_grid;  // unset: 0, 0.25, ..., 5
    EstimateOptions::SplitRule split_rule = EstimateOptions::SplitRule::matched;
    std::vector<double> contrast;  // empty: all ones
    bool oracle_theta = false;     // confint-beta treats the config's theta as known
};

struct RunConfig {
    EconomyConfig economy;
    InferenceSettings inference;
    std::string hash;  // FNV-1a of the canonical dump
};

// Parses the JSON config (comments allowed). Every unknown key, missing
// required key, ill-typed value and violated invariant is collected and
// reported together in one ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Canonical JSON of a config; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const RunConfig& c);
RunConfig default_run_config();

enum class Scale { quick, paper };

struct ExperimentPlan {
    enum class Kind { figures, tables, estimate, confint_beta, simulate } kind = Kind::simulate;
    std::string config_path;  // empty: built-in preset
    std::string data_path;    // estimate / confint-beta input
    std::uint64_t seed = 1;
    int replications = 0;  // 0: scale default
    std::string output_dir = ".";
    int jobs = 1;
    Scale scale = Scale::quick;
};

// ----------------------------------------------------------------- figures

struct FigureCase {
    std::string figure;  // figure1, figure2, figure3
    std::string theta_case;  // high, low
    EconomyConfig cfg;
};

std::vector<FigureCase> figure_cases(const EconomyConfig* base = nullptr);
std::vector<double> figure_beta_grid();
std::vector<double> default_inversion_grid();

struct FigurePoint {
    std::string figure;
    std::string theta_case;
    double theta1 = 0;
    double beta = 0;
    double p_star = 0;
    double edu_share = 0;
    double gini = 0;
    double sort_corr = 0;
    double wage_premium = 0;
    int reps = 0;
    int sort_corr_reps = 0;
    int negative_profit = 0;  // matches with f < g, summed over replications
};

// Averages over replications at one beta. Every firm type is made to prefer
// high education. Replication r uses the same covariates and uniforms at
// every beta.
FigurePoint figure_point(const FigureCase& fc, double beta, int reps, std::uint64_t seed, BlockCache& cache,
                         Exec exec = Exec::parallel);

std::vector<FigurePoint> run_figure_curves(const std::vector<FigureCase>& cases, const std::vector<double>& betas,
                                           int reps, std::uint64_t seed, Exec exec = Exec::parallel);

void write_figure_csv(std::ostream& os, const std::vector<FigurePoint>& rows, const std::string& hash);

// ------------------------------------------------------------------ tables

struct TableSpec {
    std::string name;  // g1f1, g1f2, g2f1, g2f2
    ProductionForm production;
    OutsideForm outside;
};
std::vector<TableSpec> table_specs();

// Base economy of the coverage study: theta0 = (1, 1), scalar X uniform on
// [0, 1], h in {0, 1}, K in {1/2, 1} with equal mass, sigma = 1.
EconomyConfig table_economy(const TableSpec& spec, double beta0, int n, const EconomyConfig* base = nullptr);

struct TableCell {
    std::string spec;
    double beta0 = 0;
    int n = 0;
    int sims = 0;
    int B = 0;
    int completed = 0;
    int covered = 0;
    double coverage = 0;
    double mean_length = 0;
    std::vector<double> lengths;
    std::vector<std::string> errors;
};

// Coverage and mean length of the bootstrap percentile interval for a'theta0
// over independent simulated datasets.
TableCell table_cell(const TableSpec& spec, const EconomyConfig& cfg, int sims, int B, const InferenceSettings& inf,
                     std::uint64_t seed, Exec exec = Exec::parallel);

void write_table_csv(std::ostream& os, const std::vector<TableCell>& cells, const std::string& hash);

// --------------------------------------------------------- data generation

struct SimulatedData {
    ObservedData data;
    MatchingOutcome outcome;
    EquilibriumSolution eq;
    FirmPreferenceSplit split;
};

// Full data-generating process at the config's (theta, beta): covariates,
// equilibrium, education, firm types, matching and wages.
SimulatedData simulate_data(const EconomyConfig& cfg, BlockCache& cache, std::uint64_t seed, std::uint64_t rep,
                            Exec exec = Exec::parallel);

// ----------------------------------------------------------------- drivers
// Each writes its CSV files into plan.output_dir and returns the list of
// files written.

std::vector<std::string> run_figures(const ExperimentPlan& plan);
std::vector<std::string> run_tables(const ExperimentPlan& plan);
std::vector<std::string> run_simulate(const ExperimentPlan& plan);
std::vector<std::string> run_estimate(const ExperimentPlan& plan);
std::vector<std::string> run_confint_beta(const ExperimentPlan& plan);

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace labmatch
