#include "labmatch/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "labmatch/csv.hpp"
#include "labmatch/matcher.hpp"

namespace labmatch {

using json = nlohmann::json;

namespace {

std::uint64_t bits(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Reads one config section, remembering which keys were consumed so the
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& root, const std::string& name, bool required, std::vector<std::string>& problems)
        : name_(name), problems_(problems) {
        if (!root.contains(name)) {
            if (required) problems_.push_back("missing section '" + name + "'");
            list_missing_ = required;
            return;
        }
        node_ = &root.at(name);
        if (!node_->is_object()) {
            problems_.push_back("section '" + name + "' must be an object");
            node_ = nullptr;
        }
    }

    template <class T>
    void get(const std::string& key, T& out, bool required) {
        if (!node_) {
            if (required && list_missing_) problems_.push_back("missing key '" + path(key) + "'");
            return;
        }
        seen_.insert(key);
        if (!node_->contains(key)) {
            if (required) problems_.push_back("missing key '" + path(key) + "'");
            return;
        }
        const json& v = node_->at(key);
        if (!convert(v, out)) problems_.push_back("key '" + path(key) + "' has the wrong type (" + describe<T>() + " expected)");
    }

    template <class T>
    void get(const std::string& key, std::optional<T>& out) {
        T tmp{};
        const std::size_t before = problems_.size();
        if (node_ && node_->contains(key)) {
            get(key, tmp, true);
            if (problems_.size() == before) out = tmp;
        } else if (node_) {
            seen_.insert(key);
        }
    }

    void finish() {
        if (!node_) return;
        for (auto it = node_->begin(); it != node_->end(); ++it)
            if (!seen_.count(it.key())) problems_.push_back("unknown key '" + path(it.key()) + "'");
    }

private:
    std::string path(const std::string& key) const { return name_ + "." + key; }

    static bool convert(const json& v, double& out) {
        if (!v.is_number()) return false;
        out = v.get<double>();
        return true;
    }
    static bool convert(const json& v, int& out) {
        if (!v.is_number_integer()) return false;
        out = v.get<int>();
        return true;
    }
    static bool convert(const json& v, bool& out) {
        if (!v.is_boolean()) return false;
        out = v.get<bool>();
        return true;
    }
    static bool convert(const json& v, std::string& out) {
        if (!v.is_string()) return false;
        out = v.get<std::string>();
        return true;
    }
    static bool convert(const json& v, std::vector<double>& out) {
        if (!v.is_array()) return false;
        std::vector<double> tmp;
        for (const auto& e : v) {
            if (!e.is_number()) return false;
            tmp.push_back(e.get<double>());
        }
        out = std::move(tmp);
        return true;
    }
    template <class T>
    static std::string describe() {
        if constexpr (std::is_same_v<T, double>) return "number";
        else if constexpr (std::is_same_v<T, int>) return "integer";
        else if constexpr (std::is_same_v<T, bool>) return "boolean";
        else if constexpr (std::is_same_v<T, std::string>) return "string";
        else return "array of numbers";
    }

    std::string name_;
    std::vector<std::string>& problems_;
    const json* node_ = nullptr;
    bool list_missing_ = false;  // required section absent: name each key
    std::set<std::string> seen_;
};

template <class E>
void enum_key(Section& sec, const std::string& key, E& out, bool required,
              const std::vector<std::pair<std::string, E>>& names, std::vector<std::string>& problems,
              const std::string& section) {
    std::string s;
    const std::size_t before = problems.size();
    sec.get(key, s, required);
    if (s.empty() || problems.size() != before) return;
    for (const auto& [name, value] : names)
        if (name == s) {
            out = value;
            return;
        }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + name;
    problems.push_back("key '" + section + "." + key + "' must be one of " + allowed + " (got '" + s + "')");
}

const std::vector<std::pair<std::string, ProductionForm>> kProduction{
    {"multiplicative", ProductionForm::multiplicative}, {"additive", ProductionForm::additive}};
const std::vector<std::pair<std::string, OutsideForm>> kOutside{
    {"g1_exp_interaction", OutsideForm::g1_exp_interaction}, {"g2_level_exp", OutsideForm::g2_level_exp}};
const std::vector<std::pair<std::string, CapitalDraw>> kDraw{{"iid", CapitalDraw::iid},
                                                             {"exact_counts", CapitalDraw::exact_counts}};
const std::vector<std::pair<std::string, OrderStatConvention>> kOrder{
    {"exclusive", OrderStatConvention::exclusive}, {"inclusive", OrderStatConvention::inclusive}};
const std::vector<std::pair<std::string, EstimateOptions::SplitRule>> kRule{
    {"matched", EstimateOptions::SplitRule::matched}, {"all", EstimateOptions::SplitRule::all}};

std::string rule_name(EstimateOptions::SplitRule r) {
    return r == EstimateOptions::SplitRule::matched ? "matched" : "all";
}

void pair_key(Section& sec, const std::string& key, double& lo, double& hi, bool required,
              std::vector<std::string>& problems, const std::string& section) {
    std::vector<double> v;
    const std::size_t before = problems.size();
    sec.get(key, v, required);
    if (problems.size() != before || v.empty()) return;
    if (v.size() != 2) {
        problems.push_back("key '" + section + "." + key + "' must have exactly two entries");
        return;
    }
    lo = v[0];
    hi = v[1];
}

} // namespace

RunConfig default_run_config() {
    RunConfig c;
    c.hash = fnv1a_hex(dump_config(c));
    return c;
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    if (!root.is_object()) throw ConfigError({"config must be a JSON object"});

    std::vector<std::string> problems;
    RunConfig rc;
    EconomyConfig& c = rc.economy;
    InferenceSettings& inf = rc.inference;

    Section eco(root, "economy", true, problems);
    eco.get("n_workers", c.n_workers, true);
    eco.get("n_firms", c.n_firms, true);
    pair_key(eco, "edu_levels", c.h_low, c.h_high, true, problems, "economy");
    eco.get("capital_support", c.capital_support, true);
    eco.get("capital_mass", c.capital_mass, true);
    eco.get("covariate_dim", c.covariate_dim, true);
    pair_key(eco, "covariate_range", c.covariate_low, c.covariate_high, true, problems, "economy");
    enum_key(eco, "capital_draw", c.capital_draw, false, kDraw, problems, "economy");
    eco.finish();

    Section par(root, "parameters", true, problems);
    par.get("theta1", c.theta1, true);
    par.get("theta2", c.theta2, true);
    par.get("beta", c.beta, true);
    par.get("sigma", c.sigma, true);
    par.get("tau", c.tau, true);
    par.finish();

    Section forms(root, "forms", true, problems);
    enum_key(forms, "production", c.production, true, kProduction, problems, "forms");
    enum_key(forms, "outside", c.outside, true, kOutside, problems, "forms");
    forms.finish();

    Section num(root, "numerics", false, problems);
    num.get("beta_draws", c.beta_draws, false);
    num.get("support_nodes", c.support_nodes, false);
    enum_key(num, "order_stat", c.order_stat, false, kOrder, problems, "numerics");
    num.get("solver_tol", c.solver.tol, false);
    num.get("solver_max_iter", c.solver.max_iter, false);
    num.get("solver_damping", c.solver.damping, false);
    num.get("solver_p0", c.solver.p0, false);
    num.finish();

    Section in(root, "inference", false, problems);
    in.get("R", inf.R, false);
    in.get("alpha", inf.alpha, false);
    in.get("bootstrap", inf.bootstrap, false);
    in.get("lhs_points", inf.lhs_points, false);
    in.get("beta_grid", inf.beta_grid);
    enum_key(in, "split_rule", inf.split_rule, false, kRule, problems, "inference");
    in.get("contrast", inf.contrast, false);
    in.get("oracle_theta", inf.oracle_theta, false);
    in.finish();

    for (auto it = root.begin(); it != root.end(); ++it) {
        static const std::set<std::string> known{"economy", "parameters", "forms", "numerics", "inference"};
        if (!known.count(it.key())) problems.push_back("unknown section '" + it.key() + "'");
    }

    // Model invariants are only meaningful once every field parsed.
    if (problems.empty())
        for (auto& p : check(c)) problems.push_back(p);
    {
        if (inf.R < 1) problems.push_back("inference.R must be at least 1");
        if (!(inf.alpha > 0 && inf.alpha < 1)) problems.push_back("inference.alpha must lie in (0, 1)");
        if (inf.bootstrap < 2) problems.push_back("inference.bootstrap must be at least 2");
        if (inf.lhs_points < 0) problems.push_back("inference.lhs_points must be non-negative");
        if (!inf.contrast.empty() && inf.contrast.size() != c.theta2.size() + 1)
            problems.push_back("inference.contrast must have one entry per theta component (" +
                               std::to_string(c.theta2.size() + 1) + ")");
    }
    if (!problems.empty()) throw ConfigError(problems);
    rc.hash = fnv1a_hex(dump_config(rc));
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& rc) {
    const EconomyConfig& c = rc.economy;
    const InferenceSettings& inf = rc.inference;
    json j;
    j["economy"] = {{"n_workers", c.n_workers},
                    {"n_firms", c.n_firms},
                    {"edu_levels", {c.h_low, c.h_high}},
                    {"capital_support", c.capital_support},
                    {"capital_mass", c.capital_mass},
                    {"covariate_dim", c.covariate_dim},
                    {"covariate_range", {c.covariate_low, c.covariate_high}},
                    {"capital_draw", to_string(c.capital_draw)}};
    j["parameters"] = {
        {"theta1", c.theta1}, {"theta2", c.theta2}, {"beta", c.beta}, {"sigma", c.sigma}, {"tau", c.tau}};
    j["forms"] = {{"production", to_string(c.production)}, {"outside", to_string(c.outside)}};
    j["numerics"] = {{"beta_draws", c.beta_draws},
                     {"support_nodes", c.support_nodes},
                     {"order_stat", to_string(c.order_stat)},
                     {"solver_tol", c.solver.tol},
                     {"solver_max_iter", c.solver.max_iter},
                     {"solver_damping", c.solver.damping},
                     {"solver_p0", c.solver.p0}};
    j["inference"] = {{"R", inf.R},
                      {"alpha", inf.alpha},
                      {"bootstrap", inf.bootstrap},
                      {"lhs_points", inf.lhs_points},
                      {"split_rule", rule_name(inf.split_rule)},
                      {"contrast", inf.contrast},
                      {"oracle_theta", inf.oracle_theta}};
    if (inf.beta_grid) j["inference"]["beta_grid"] = *inf.beta_grid;
    return j.dump(2);
}

// ----------------------------------------------------------------- figures

std::vector<double> figure_beta_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 10; ++i) g.push_back(0.5 * i);
    return g;
}

std::vector<double> default_inversion_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 20; ++i) g.push_back(0.25 * i);
    return g;
}

std::vector<FigureCase> figure_cases(const EconomyConfig* base) {
    EconomyConfig b;
    if (base) {
        b = *base;
    } else {
        b.n_workers = b.n_firms = 500;
        b.h_low = 1.0;
        b.h_high = 2.0;
        b.capital_support = {0.5, 1.0};
        b.capital_mass = {0.5, 0.5};
        b.theta2 = {-0.75, 0.25, 0.5};
        b.covariate_dim = 3;
        b.covariate_low = 0.0;
        b.covariate_high = 1.0;
        b.outside = OutsideForm::g1_exp_interaction;
        b.capital_draw = CapitalDraw::exact_counts;
    }
    auto make = [&](const char* fig, const char* which, ProductionForm f, double t1) {
        FigureCase fc{fig, which, b};
        fc.cfg.production = f;
        fc.cfg.theta1 = t1;
        return fc;
    };
    return {make("figure1", "high", ProductionForm::multiplicative, 3.0),
            make("figure1", "low", ProductionForm::multiplicative, 1.0),
            make("figure2", "high", ProductionForm::additive, 2.0),
            make("figure2", "low", ProductionForm::additive, 1.0),
            make("figure3", "high", ProductionForm::multiplicative, 2.5),
            make("figure3", "low", ProductionForm::multiplicative, 0.7)};
}

FigurePoint figure_point(const FigureCase& fc, double beta, int reps, std::uint64_t seed, BlockCache& cache,
                         Exec exec) {
    EconomyConfig cfg = fc.cfg;
    cfg.beta = beta;
    const FirmPreferenceSplit split = homogeneous_split(true, cfg.n_types());
    const std::uint64_t fseed = derive_seed(seed, Stream::figure, fnv1a(fc.figure + "/" + fc.theta_case));

    struct Slot {
        double p = 0, share = 0, gini = 0, premium = 0;
        std::optional<double> corr;
        int neg = 0;
        std::string error;
    };
    std::vector<Slot> slots(reps);
    auto one = [&](int r) {
        Slot& s = slots[r];
        try {
            const WorkerSample w = draw_workers(cfg, fseed, r);
            const GameSetup game = make_game(cfg, w.covariates, split, cache);
            const EquilibriumSolution eq = solve_fixed_point(game, Exec::serial);
            if (!eq.converged) throw NumericalError("equilibrium did not converge");
            Rng rng = make_rng(fseed, Stream::actions, r);
            const Education H = sample_actions(eq.psi_star, rng);
            MatchingOutcome out = simulate_economy(H, split, cfg, rng);
            assign_wages(out, H, w.covariates, cfg);
            const OutcomeStats st = summarize(out, H, cfg);
            s.p = eq.p_star;
            s.share = st.edu_share;
            s.gini = st.gini;
            s.corr = st.sort_corr;
            s.premium = st.wage_premium.value_or(0.0);
            s.neg = static_cast<int>(out.negative_profit.size());
        } catch (const std::exception& e) {
            s.error = e.what();
        }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < reps; ++r) one(r);
    } else {
        for (int r = 0; r < reps; ++r) one(r);
    }

    FigurePoint pt;
    pt.figure = fc.figure;
    pt.theta_case = fc.theta_case;
    pt.theta1 = cfg.theta1;
    pt.beta = beta;
    for (const Slot& s : slots) {
        if (!s.error.empty()) throw NumericalError(fc.figure + "/" + fc.theta_case + ": " + s.error);
        pt.p_star += s.p;
        pt.edu_share += s.share;
        pt.gini += s.gini;
        pt.wage_premium += s.premium;
        pt.negative_profit += s.neg;
        if (s.corr) {
            pt.sort_corr += *s.corr;
            ++pt.sort_corr_reps;
        }
    }
    pt.reps = reps;
    pt.p_star /= reps;
    pt.edu_share /= reps;
    pt.gini /= reps;
    pt.wage_premium /= reps;
    if (pt.sort_corr_reps) pt.sort_corr /= pt.sort_corr_reps;
    return pt;
}

std::vector<FigurePoint> run_figure_curves(const std::vector<FigureCase>& cases, const std::vector<double>& betas,
                                           int reps, std::uint64_t seed, Exec exec) {
    std::vector<FigurePoint> rows;
    if (cases.empty()) return rows;
    // Blocks depend on the economy only through n, capital and sigma, which
    // every figure case shares.
    BlockCache cache(MatchSettings::from(cases.front().cfg, derive_seed(seed, Stream::beta_bank)), exec);
    for (const auto& fc : cases)
        for (double b : betas) rows.push_back(figure_point(fc, b, reps, seed, cache, exec));
    return rows;
}

void write_figure_csv(std::ostream& os, const std::vector<FigurePoint>& rows, const std::string& hash) {
    write_provenance(os, hash);
    os << "figure,theta_case,theta1,beta,p_star,edu_share,gini,sort_corr,wage_premium,reps,negative_profit\n";
    os.precision(10);
    for (const auto& r : rows) {
        os << r.figure << ',' << r.theta_case << ',' << r.theta1 << ',' << r.beta << ',' << r.p_star << ','
           << r.edu_share << ',' << r.gini << ',';
        if (r.sort_corr_reps) os << r.sort_corr;
        else os << "NA";
        os << ',' << r.wage_premium << ',' << r.reps << ',' << r.negative_profit << '\n';
    }
}

// ------------------------------------------------------------------ tables

std::vector<TableSpec> table_specs() {
    return {{"g1f1", ProductionForm::multiplicative, OutsideForm::g1_exp_interaction},
            {"g1f2", ProductionForm::additive, OutsideForm::g1_exp_interaction},
            {"g2f1", ProductionForm::multiplicative, OutsideForm::g2_level_exp},
            {"g2f2", ProductionForm::additive, OutsideForm::g2_level_exp}};
}

EconomyConfig table_economy(const TableSpec& spec, double beta0, int n, const EconomyConfig* base) {
    EconomyConfig c;
    if (base) {
        c = *base;
    } else {
        c.h_low = 0.0;
        c.h_high = 1.0;
        c.capital_support = {0.5, 1.0};
        c.capital_mass = {0.5, 0.5};
        c.theta1 = 1.0;
        c.theta2 = {1.0};
        c.covariate_dim = 1;
        c.sigma = 1.0;
        c.tau = 0.5;
        c.beta_draws = 100;
    }
    c.n_workers = c.n_firms = n;
    c.beta = beta0;
    c.production = spec.production;
    c.outside = spec.outside;
    return c;
}

SimulatedData simulate_data(const EconomyConfig& cfg, BlockCache& cache, std::uint64_t seed, std::uint64_t rep,
                            Exec exec) {
    SimulatedData sd;
    const WorkerSample w = draw_workers(cfg, seed, rep);
    const GameSetup game = make_game(cfg, w.covariates, cache);
    sd.eq = solve_fixed_point(game, exec);
    if (!sd.eq.converged) throw NumericalError("equilibrium did not converge");
    sd.split = game.split;
    Rng rng = make_rng(seed, Stream::actions, rep);
    const Education H = sample_actions(sd.eq.psi_star, rng);
    sd.outcome = simulate_economy(H, game.split, cfg, rng);
    assign_wages(sd.outcome, H, w.covariates, cfg);
    sd.data.X = w.covariates;
    sd.data.H = H;
    sd.data.matched_type = sd.outcome.matched_type;
    return sd;
}

TableCell table_cell(const TableSpec& spec, const EconomyConfig& cfg, int sims, int B, const InferenceSettings& inf,
                     std::uint64_t seed, Exec exec) {
    const std::uint64_t cseed =
        derive_seed(seed, Stream::replication, fnv1a(spec.name), bits(cfg.beta), static_cast<std::uint64_t>(cfg.n()));
    BlockCache cache(MatchSettings::from(cfg, derive_seed(cseed, Stream::beta_bank)), Exec::serial);
    std::vector<double> a = inf.contrast;
    if (a.empty()) a.assign(cfg.theta2.size() + 1, 1.0);
    const std::vector<double> th0 = cfg.theta();
    const double target = std::inner_product(a.begin(), a.end(), th0.begin(), 0.0);

    struct Slot {
        bool ok = false;
        double lo = 0, hi = 0;
        std::string error;
    };
    std::vector<Slot> slots(sims);
    auto one = [&](int r) {
        Slot& s = slots[r];
        try {
            const SimulatedData sd = simulate_data(cfg, cache, cseed, r, Exec::serial);
            EstimateOptions eo;
            eo.split_rule = inf.split_rule;
            BootstrapOptions bo;
            bo.B = B;
            bo.alpha = inf.alpha;
            bo.contrast = a;
            bo.estimate = eo;
            if (eo.split_rule == EstimateOptions::SplitRule::matched) eo.matching = sd.data.table(cfg.n_types());
            const ThetaEstimate est = estimate_theta(cfg.beta, sd.data.H, sd.data.X, cfg, cache, eo);
            const BootstrapResult br = bootstrap_theta_ci(est.theta, cfg.beta, sd.data.X, cfg, cache, bo, cseed,
                                                          static_cast<std::uint64_t>(r), Exec::serial);
            s.lo = br.region.contrast_lo;
            s.hi = br.region.contrast_hi;
            s.ok = true;
        } catch (const NumericalError& e) {
            s.error = e.what();
        }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < sims; ++r) one(r);
    } else {
        for (int r = 0; r < sims; ++r) one(r);
    }

    TableCell cell;
    cell.spec = spec.name;
    cell.beta0 = cfg.beta;
    cell.n = cfg.n();
    cell.sims = sims;
    cell.B = B;
    for (int r = 0; r < sims; ++r) {
        const Slot& s = slots[r];
        if (!s.ok) {
            cell.errors.push_back("replication " + std::to_string(r) + ": " + s.error);
            continue;
        }
        ++cell.completed;
        cell.covered += (s.lo <= target && target <= s.hi);
        cell.lengths.push_back(s.hi - s.lo);
    }
    if (cell.completed) {
        cell.coverage = double(cell.covered) / cell.completed;
        cell.mean_length = std::accumulate(cell.lengths.begin(), cell.lengths.end(), 0.0) / cell.completed;
    }
    return cell;
}

void write_table_csv(std::ostream& os, const std::vector<TableCell>& cells, const std::string& hash) {
    write_provenance(os, hash);
    os << "spec,beta0,n,sims,bootstrap,completed,coverage,mean_length\n";
    os.precision(10);
    for (const auto& c : cells) {
        os << c.spec << ',' << c.beta0 << ',' << c.n << ',' << c.sims << ',' << c.B << ',' << c.completed << ',';
        // A cell with more than 5% failed replications is not reported.
        if (c.completed == 0 || c.sims - c.completed > 0.05 * c.sims) os << "NA,NA\n";
        else os << c.coverage << ',' << c.mean_length << '\n';
    }
}

// ----------------------------------------------------------------- drivers

namespace {

std::string out_path(const ExperimentPlan& plan, const std::string& file) {
    std::filesystem::create_directories(plan.output_dir);
    return (std::filesystem::path(plan.output_dir) / file).string();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot write '" + path + "'");
    return os;
}

Exec plan_exec(const ExperimentPlan& plan) {
    set_threads(plan.jobs);
    return plan.jobs > 1 ? Exec::parallel : Exec::serial;
}

RunConfig plan_config(const ExperimentPlan& plan) {
    return plan.config_path.empty() ? default_run_config() : load_config(plan.config_path);
}

void report_ir(const EconomyConfig& cfg, const Matrix& X) {
    const IrReport ir = ir_report(cfg, X);
    if (!ir.ok()) std::cerr << "warning: " << ir.message() << '\n';
}

} // namespace

std::vector<std::string> run_figures(const ExperimentPlan& plan) {
    const Exec exec = plan_exec(plan);
    std::optional<RunConfig> rc;
    if (!plan.config_path.empty()) rc = load_config(plan.config_path);
    const auto cases = figure_cases(rc ? &rc->economy : nullptr);
    const int reps = plan.replications > 0 ? plan.replications : (plan.scale == Scale::paper ? 500 : 100);
    const std::string hash =
        fnv1a_hex(std::string("figures|") + std::to_string(reps) + "|" +
                  (rc ? rc->hash : fnv1a_hex(dump_config(RunConfig{cases.front().cfg, {}, {}}))));
    const auto rows = run_figure_curves(cases, figure_beta_grid(), reps, plan.seed, exec);
    std::vector<std::string> files;
    for (const char* fig : {"figure1", "figure2", "figure3"}) {
        std::vector<FigurePoint> sub;
        for (const auto& r : rows)
            if (r.figure == fig) sub.push_back(r);
        const std::string p = out_path(plan, std::string(fig) + ".csv");
        auto os = open_out(p);
        write_figure_csv(os, sub, hash);
        files.push_back(p);
    }
    return files;
}

std::vector<std::string> run_tables(const ExperimentPlan& plan) {
    const Exec exec = plan_exec(plan);
    std::optional<RunConfig> rc;
    if (!plan.config_path.empty()) rc = load_config(plan.config_path);
    InferenceSettings inf = rc ? rc->inference : InferenceSettings{};
    const bool paper = plan.scale == Scale::paper;
    const int sims = plan.replications > 0 ? plan.replications : (paper ? 500 : 100);
    const int B = paper ? 200 : 100;
    const std::vector<int> ns = paper ? std::vector<int>{500, 1000} : std::vector<int>{250, 500};
    const std::string hash = fnv1a_hex(std::string("tables|") + (paper ? "paper" : "quick") + "|" +
                                       std::to_string(sims) + "|" + (rc ? rc->hash : "preset"));
    std::vector<TableCell> cells;
    for (double b0 : {0.0, 1.0, 2.0, 3.0})
        for (int n : ns)
            for (const auto& spec : table_specs()) {
                const EconomyConfig cfg = table_economy(spec, b0, n, rc ? &rc->economy : nullptr);
                TableCell cell = table_cell(spec, cfg, sims, B, inf, plan.seed, exec);
                for (const auto& e : cell.errors)
                    std::cerr << spec.name << " beta0=" << b0 << " n=" << n << ": " << e << '\n';
                cells.push_back(std::move(cell));
            }
    const std::string p = out_path(plan, "tables.csv");
    auto os = open_out(p);
    write_table_csv(os, cells, hash);
    return {p};
}

std::vector<std::string> run_simulate(const ExperimentPlan& plan) {
    const Exec exec = plan_exec(plan);
    const RunConfig rc = plan_config(plan);
    const EconomyConfig& cfg = rc.economy;
    const int reps = plan.replications > 0 ? plan.replications : 1;
    BlockCache cache(MatchSettings::from(cfg, derive_seed(plan.seed, Stream::beta_bank)), exec);
    std::vector<std::string> files;
    const std::string sp = out_path(plan, "summary.csv");
    auto summary = open_out(sp);
    write_provenance(summary, rc.hash);
    summary << "rep,p_star,iterations,residual,converged,unique,case_index,edu_share,gini,sort_corr,wage_premium,"
               "negative_profit\n";
    summary.precision(10);
    for (int r = 0; r < reps; ++r) {
        const SimulatedData sd = simulate_data(cfg, cache, plan.seed, r, exec);
        if (r == 0) report_ir(cfg, sd.data.X);
        const OutcomeStats st = summarize(sd.outcome, sd.data.H, cfg);
        summary << r << ',' << sd.eq.p_star << ',' << sd.eq.iterations << ',' << sd.eq.residual << ','
                << int(sd.eq.converged) << ',' << int(sd.eq.unique_flag) << ',' << sd.split.case_index() << ','
                << st.edu_share << ',' << st.gini << ',';
        if (st.sort_corr) summary << *st.sort_corr;
        else summary << "NA";
        summary << ',';
        if (st.wage_premium) summary << *st.wage_premium;
        else summary << "NA";
        summary << ',' << sd.outcome.negative_profit.size() << '\n';

        const std::string name = reps == 1 ? "data.csv" : "data_" + std::to_string(r) + ".csv";
        const std::string dp = out_path(plan, name);
        auto os = open_out(dp);
        write_outcome_csv(os, sd.outcome, sd.data.H, sd.data.X, rc.hash);
        files.push_back(dp);
        if (r == 0) {
            const std::string tp = out_path(plan, "trace.csv");
            auto ts = open_out(tp);
            write_provenance(ts, rc.hash);
            write_trace_csv(ts, sd.eq);
            files.push_back(tp);
            const std::string pp = out_path(plan, "pi.csv");
            auto ps = open_out(pp);
            write_provenance(ps, rc.hash);
            const auto block = cache.get(sd.split, cfg.beta);
            write_pi_csv(ps, pi_table(*block, sd.eq.p_star));
            files.push_back(pp);
        }
    }
    files.insert(files.begin(), sp);
    return files;
}

std::vector<std::string> run_estimate(const ExperimentPlan& plan) {
    const Exec exec = plan_exec(plan);
    if (plan.data_path.empty()) throw UsageError("estimate needs --data");
    const RunConfig rc = plan_config(plan);
    const EconomyConfig& cfg = rc.economy;
    const InferenceSettings& inf = rc.inference;
    const ObservedData data = read_outcome_csv(plan.data_path, cfg.n_types());
    if (data.X.cols != cfg.covariate_dim)
        throw ConfigError({"data has " + std::to_string(data.X.cols) + " covariate columns but economy.covariate_dim is " +
                           std::to_string(cfg.covariate_dim)});
    const int B = plan.replications > 0 ? plan.replications : inf.bootstrap;
    EconomyConfig c = cfg;
    c.n_workers = c.n_firms = data.size();
    BlockCache cache(MatchSettings::from(c, derive_seed(plan.seed, Stream::beta_bank)), exec);
    EstimateOptions eo;
    eo.split_rule = inf.split_rule;
    BootstrapOptions bo;
    bo.B = B;
    bo.alpha = inf.alpha;
    bo.contrast = inf.contrast;
    bo.estimate = eo;
    if (eo.split_rule == EstimateOptions::SplitRule::matched) eo.matching = data.table(c.n_types());
    const ThetaEstimate est = estimate_theta(c.beta, data.H, data.X, c, cache, eo);
    const BootstrapResult br = bootstrap_theta_ci(est.theta, c.beta, data.X, c, cache, bo, plan.seed, 0, exec);

    const std::string p = out_path(plan, "estimate.csv");
    auto os = open_out(p);
    write_provenance(os, rc.hash);
    os << "parameter,estimate,ci_lo,ci_hi\n";
    os.precision(10);
    for (std::size_t k = 0; k < est.theta.size(); ++k) {
        const std::string name = k == 0 ? "theta1" : "theta2_" + std::to_string(k);
        os << name << ',' << est.theta[k] << ',' << br.region.box_lo[k] << ',' << br.region.box_hi[k] << '\n';
    }
    std::vector<double> a = inf.contrast;
    if (a.empty()) a.assign(est.theta.size(), 1.0);
    os << "contrast," << std::inner_product(a.begin(), a.end(), est.theta.begin(), 0.0) << ','
       << br.region.contrast_lo << ',' << br.region.contrast_hi << '\n';
    os << "loglik," << est.loglik << ",NA,NA\n";
    os << "split_case," << est.case_index << ",NA,NA\n";
    os << "bootstrap_failures," << br.failures << ",NA,NA\n";
    return {p};
}

std::vector<std::string> run_confint_beta(const ExperimentPlan& plan) {
    const Exec exec = plan_exec(plan);
    if (plan.data_path.empty()) throw UsageError("confint-beta needs --data");
    const RunConfig rc = plan_config(plan);
    const InferenceSettings& inf = rc.inference;
    const std::vector<double> grid = inf.beta_grid ? *inf.beta_grid : default_inversion_grid();
    if (grid.empty()) throw UsageError("confint-beta: the beta grid is empty");
    EconomyConfig c = rc.economy;
    const ObservedData data = read_outcome_csv(plan.data_path, c.n_types());
    if (data.X.cols != c.covariate_dim)
        throw ConfigError({"data has " + std::to_string(data.X.cols) + " covariate columns but economy.covariate_dim is " +
                           std::to_string(c.covariate_dim)});
    c.n_workers = c.n_firms = data.size();

    TwoStageOptions opt;
    opt.R = plan.replications > 0 ? plan.replications : inf.R;
    opt.alpha = inf.alpha;
    opt.lhs_points = inf.lhs_points;
    opt.first_stage.B = inf.bootstrap;
    opt.first_stage.contrast = inf.contrast;
    opt.first_stage.estimate.split_rule = inf.split_rule;
    if (inf.oracle_theta) opt.oracle_theta = c.theta();
    const TwoStageResult res = two_stage_beta(data, c, grid, opt, plan.seed, exec);

    const std::string p = out_path(plan, "confint_beta.csv");
    {
        auto os = open_out(p);
        write_provenance(os, rc.hash);
        write_two_stage_csv(os, res);
    }
    const std::string rp = out_path(plan, "confint_beta_region.csv");
    auto os = open_out(rp);
    write_provenance(os, rc.hash);
    os << "level,accepted,undetermined,beta_min,beta_max,accepted_betas\n";
    const auto acc = res.region.accepted();
    const long und = std::count(res.region.status.begin(), res.region.status.end(), -1);
    os << res.region.level << ',' << acc.size() << ',' << und << ',';
    if (acc.empty()) {
        os << "NA,NA,\n";
    } else {
        os << acc.front() << ',' << acc.back() << ',';
        for (std::size_t i = 0; i < acc.size(); ++i) os << (i ? ";" : "") << acc[i];
        os << '\n';
    }
    for (const auto& row : res.rows)
        if (!row.note.empty()) std::cerr << "beta=" << row.beta << " undetermined: " << row.note << '\n';
    return {p, rp};
}

} // namespace labmatch
