#include "labmatch/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace labmatch {

double production(double h, double k, double theta1, ProductionForm form) {
    return form == ProductionForm::multiplicative ? theta1 * h * k : theta1 * (h + k);
}

double production(double h, double k, const EconomyConfig& cfg) {
    return production(h, k, cfg.theta1, cfg.production);
}

double outside_option(double h, const double* x, int d, const EconomyConfig& cfg) {
    if (d != static_cast<int>(cfg.theta2.size()))
        throw std::invalid_argument("covariate dimension does not match theta2");
    double xb = 0;
    for (int l = 0; l < d; ++l) xb += x[l] * cfg.theta2[l];
    return cfg.outside == OutsideForm::g1_exp_interaction ? std::exp(h * xb) : h * std::exp(xb);
}

double outside_option(double h, const std::vector<double>& x, const EconomyConfig& cfg) {
    return outside_option(h, x.data(), static_cast<int>(x.size()), cfg);
}

double cost(double h, const double* x, int d, const EconomyConfig& cfg) {
    if (!cfg.cost) return 0.0;
    return cfg.cost(h, std::vector<double>(x, x + d));
}

Payoffs bargain_payoffs(double h, double k, double g, const EconomyConfig& cfg) {
    const double f = production(h, k, cfg);
    return {cfg.tau * f + (1 - cfg.tau) * g, (1 - cfg.tau) * (f - g)};
}

Payoffs bargain_payoffs(double h, double k, const std::vector<double>& x, const EconomyConfig& cfg) {
    return bargain_payoffs(h, k, outside_option(h, x, cfg), cfg);
}

WorkerSample draw_workers(const EconomyConfig& cfg, std::uint64_t seed, std::uint64_t rep) {
    Rng rng = make_rng(seed, Stream::covariates, rep);
    WorkerSample w;
    w.covariates = Matrix(cfg.n_workers, cfg.covariate_dim);
    const double lo = cfg.covariate_low, span = cfg.covariate_high - cfg.covariate_low;
    for (double& v : w.covariates.data) v = lo + span * uniform01(rng);
    return w;
}

Matrix draw_taste_shocks(int n, Rng& rng) {
    Matrix e(n, 2);
    std::extreme_value_distribution<double> gumbel(0.0, 1.0);
    for (double& v : e.data) v = gumbel(rng);
    return e;
}

OutsideValues outside_values(const Matrix& X, const EconomyConfig& cfg) {
    OutsideValues o;
    o.low.resize(X.rows);
    o.high.resize(X.rows);
    for (int i = 0; i < X.rows; ++i) {
        o.low[i] = outside_option(cfg.h_low, X.row(i), X.cols, cfg);
        o.high[i] = outside_option(cfg.h_high, X.row(i), X.cols, cfg);
    }
    if (X.rows > 0) {
        o.mean_low = std::accumulate(o.low.begin(), o.low.end(), 0.0) / X.rows;
        o.mean_high = std::accumulate(o.high.begin(), o.high.end(), 0.0) / X.rows;
    }
    return o;
}

FirmPreferenceSplit split_from_mask(std::uint64_t mask, const std::vector<double>& q) {
    FirmPreferenceSplit s;
    s.mask = mask;
    double ql = 0;
    for (int m = 0; m < static_cast<int>(q.size()); ++m) {
        if ((mask >> m) & 1u) {
            s.prefers_high.push_back(m);
            s.q_high += q[m];
        } else {
            s.prefers_low.push_back(m);
            ql += q[m];
        }
    }
    for (int m : s.prefers_high) s.posterior_high.push_back(q[m] / s.q_high);
    for (int m : s.prefers_low) s.posterior_low.push_back(q[m] / ql);
    if (s.prefers_low.empty()) s.q_high = 1.0;
    if (s.prefers_high.empty()) s.q_high = 0.0;
    return s;
}

FirmPreferenceSplit homogeneous_split(bool all_high, int n_types) {
    std::vector<double> q(n_types, 1.0 / n_types);
    return split_from_mask(all_high ? (std::uint64_t(1) << n_types) - 1 : 0, q);
}

FirmPreferenceSplit firm_preference_split(const EconomyConfig& cfg, double gbar_low, double gbar_high) {
    std::uint64_t mask = 0;
    for (int m = 0; m < cfg.n_types(); ++m) {
        const double k = cfg.capital_support[m];
        const double rho_high = (1 - cfg.tau) * (production(cfg.h_high, k, cfg) - gbar_high);
        const double rho_low = (1 - cfg.tau) * (production(cfg.h_low, k, cfg) - gbar_low);
        if (rho_high >= rho_low) mask |= std::uint64_t(1) << m;
    }
    FirmPreferenceSplit s = split_from_mask(mask, cfg.capital_mass);
    return s;
}

FirmPreferenceSplit firm_preference_split(const EconomyConfig& cfg, const Matrix& covariates) {
    if (covariates.rows == 0) throw std::invalid_argument("empty covariate sample");
    const OutsideValues o = outside_values(covariates, cfg);
    return firm_preference_split(cfg, o.mean_low, o.mean_high);
}

bool upward_closed(const FirmPreferenceSplit& s, int n_types) {
    bool seen = false;
    for (int m = 0; m < n_types; ++m) {
        if (s.high(m)) seen = true;
        else if (seen) return false;
    }
    return true;
}

std::string IrReport::message() const {
    std::ostringstream os;
    if (ok()) {
        os << "participation holds on all " << checked << " checked (h, k, x) triples";
    } else {
        os << violations << " of " << checked << " (h, k, x) triples have f < g (worst f - g = "
           << worst_gap << "); matched firms would earn negative profit";
    }
    return os.str();
}

IrReport ir_report(const EconomyConfig& cfg, const Matrix& X) {
    IrReport r;
    r.worst_gap = INFINITY;
    for (int i = 0; i < X.rows; ++i) {
        for (int lvl = 0; lvl < 2; ++lvl) {
            const double h = edu_value(cfg, lvl);
            const double g = outside_option(h, X.row(i), X.cols, cfg);
            for (double k : cfg.capital_support) {
                const double gap = production(h, k, cfg) - g;
                ++r.checked;
                if (gap < 0) ++r.violations;
                r.worst_gap = std::min(r.worst_gap, gap);
            }
        }
    }
    return r;
}

} // namespace labmatch
