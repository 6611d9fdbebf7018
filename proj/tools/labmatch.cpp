#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "labmatch/csv.hpp"
#include "labmatch/experiments.hpp"

using namespace labmatch;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void add_common(CLI::App* sub, ExperimentPlan& plan, std::string& scale, bool wants_data) {
    sub->add_option("--config", plan.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", plan.seed, "root seed");
    sub->add_option("--reps", plan.replications, "replications (0 uses the scale default)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", plan.output_dir, "output directory");
    sub->add_option("--jobs", plan.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--scale", scale, "preset scale")->check(CLI::IsMember({"quick", "paper"}));
    if (wants_data) sub->add_option("--data", plan.data_path, "observed-data CSV")->required();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frictional matching with endogenous schooling: simulation and inference"};
    app.set_version_flag("--version", std::string("labmatch ") + kVersion);
    app.require_subcommand(1);

    ExperimentPlan plan;
    std::string scale = "quick";
    struct Cmd {
        const char* name;
        const char* help;
        ExperimentPlan::Kind kind;
        bool data;
    };
    const Cmd cmds[] = {
        {"simulate", "draw data from the model at the config's parameters", ExperimentPlan::Kind::simulate, false},
        {"estimate", "estimate theta at the config's beta with a bootstrap interval", ExperimentPlan::Kind::estimate,
         true},
        {"confint-beta", "two-stage confidence set for beta", ExperimentPlan::Kind::confint_beta, true},
        {"figures", "comparative statics curves in beta", ExperimentPlan::Kind::figures, false},
        {"tables", "coverage and length of the theta interval", ExperimentPlan::Kind::tables, false},
    };
    for (const Cmd& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, plan, scale, c.data);
        const ExperimentPlan::Kind kind = c.kind;
        sub->callback([&plan, kind] { plan.kind = kind; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    plan.scale = scale == "paper" ? Scale::paper : Scale::quick;

    try {
        std::vector<std::string> files;
        switch (plan.kind) {
        case ExperimentPlan::Kind::simulate: files = run_simulate(plan); break;
        case ExperimentPlan::Kind::estimate: files = run_estimate(plan); break;
        case ExperimentPlan::Kind::confint_beta: files = run_confint_beta(plan); break;
        case ExperimentPlan::Kind::figures: files = run_figures(plan); break;
        case ExperimentPlan::Kind::tables: files = run_tables(plan); break;
        }
        for (const auto& f : files) std::cout << f << '\n';
    } catch (const ConfigError& e) {
        std::cerr << "config error:\n";
        for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
        return kExitConfig;
    } catch (const CsvError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
