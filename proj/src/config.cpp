#include "labmatch/config.hpp"
#include "labmatch/exec.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <omp.h>

namespace labmatch {

void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

std::vector<double> EconomyConfig::theta() const {
    std::vector<double> th{theta1};
    th.insert(th.end(), theta2.begin(), theta2.end());
    return th;
}

void EconomyConfig::set_theta(const std::vector<double>& th) {
    theta1 = th.at(0);
    theta2.assign(th.begin() + 1, th.end());
}

static std::string join(const std::vector<std::string>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "; " : "") << v[i];
    return os.str();
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems)),
      problems_(std::move(problems)) {}

std::vector<std::string> check(const EconomyConfig& cfg) {
    std::vector<std::string> bad;
    if (cfg.n_workers < 1) bad.push_back("n_workers must be at least 1");
    if (cfg.n_firms != cfg.n_workers) bad.push_back("n_firms must equal n_workers");
    if (!(cfg.h_high > cfg.h_low)) bad.push_back("edu_levels must satisfy h_high > h_low");
    if (cfg.h_low < 0) bad.push_back("edu_levels must be nonnegative");
    const auto& k = cfg.capital_support;
    const auto& q = cfg.capital_mass;
    if (k.empty()) bad.push_back("capital_support is empty");
    if (k.size() != q.size()) bad.push_back("capital_support and capital_mass differ in length");
    if (k.size() > 62) bad.push_back("at most 62 capital types are supported");
    for (std::size_t m = 0; m < k.size(); ++m) {
        if (!(k[m] > 0)) bad.push_back("capital values must be positive");
        if (m > 0 && !(k[m] > k[m - 1])) bad.push_back("capital_support must be strictly increasing");
    }
    bool pos = true;
    for (double x : q) pos = pos && x > 0;
    if (!pos) bad.push_back("capital_mass entries must be positive");
    if (std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) > 1e-12)
        bad.push_back("capital_mass must sum to 1");
    if (!(cfg.theta1 > 0)) bad.push_back("theta1 must be positive");
    if (static_cast<int>(cfg.theta2.size()) != cfg.covariate_dim)
        bad.push_back("theta2 length must equal covariate_dim");
    if (cfg.covariate_dim < 1) bad.push_back("covariate_dim must be at least 1");
    if (!(cfg.covariate_high > cfg.covariate_low)) bad.push_back("covariate bounds must be increasing");
    if (!(cfg.sigma > 0)) bad.push_back("sigma must be positive");
    if (!(cfg.tau > 0 && cfg.tau < 1)) bad.push_back("tau must lie in (0,1)");
    if (!std::isfinite(cfg.beta)) bad.push_back("beta must be finite");
    if (cfg.beta_draws < 1) bad.push_back("beta_draws must be at least 1");
    if (cfg.support_nodes < 0) bad.push_back("support_nodes must be nonnegative");
    if (!(cfg.solver.tol > 0)) bad.push_back("solver tol must be positive");
    if (cfg.solver.max_iter < 1) bad.push_back("solver max_iter must be at least 1");
    if (!(cfg.solver.damping > 0 && cfg.solver.damping <= 1)) bad.push_back("solver damping must lie in (0,1]");
    if (!(cfg.solver.p0 >= 0 && cfg.solver.p0 <= 1)) bad.push_back("solver p0 must lie in [0,1]");
    return bad;
}

void validate(const EconomyConfig& cfg) {
    auto bad = check(cfg);
    if (!bad.empty()) throw ConfigError(std::move(bad));
}

std::string to_string(ProductionForm f) {
    return f == ProductionForm::multiplicative ? "multiplicative" : "additive";
}
std::string to_string(OutsideForm f) {
    return f == OutsideForm::g1_exp_interaction ? "g1_exp_interaction" : "g2_level_exp";
}
std::string to_string(CapitalDraw d) { return d == CapitalDraw::iid ? "iid" : "exact_counts"; }
std::string to_string(OrderStatConvention c) {
    return c == OrderStatConvention::exclusive ? "exclusive" : "inclusive";
}

} // namespace labmatch
