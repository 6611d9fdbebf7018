#include "labmatch/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace labmatch {

GameSetup make_game(const EconomyConfig& cfg, const Matrix& X, const FirmPreferenceSplit& split,
                    BlockCache& cache) {
    GameSetup g;
    g.cfg = cfg;
    g.split = split;
    g.block = cache.get(split, cfg.beta);
    const OutsideValues o = outside_values(X, cfg);
    g.base.resize(X.rows);
    for (int i = 0; i < X.rows; ++i) {
        const double dc = cost(cfg.h_high, X.row(i), X.cols, cfg) - cost(cfg.h_low, X.row(i), X.cols, cfg);
        g.base[i] = (1 - cfg.tau) * (o.high[i] - o.low[i]) - dc;
    }
    return g;
}

GameSetup make_game(const EconomyConfig& cfg, const Matrix& X, BlockCache& cache) {
    return make_game(cfg, X, firm_preference_split(cfg, X), cache);
}

double production_gap(const GameSetup& g, double p_high) {
    const MatchProbTable t = pi_table(*g.block, p_high);
    return expected_production(1, t, g.cfg) - expected_production(0, t, g.cfg);
}

double production_gap_dp(const GameSetup& g, double p_high) {
    const auto d = pi_table_dp(*g.block, p_high);
    return expected_production(1, d[1], g.cfg) - expected_production(0, d[0], g.cfg);
}

double utility_gap(int worker, double p_high, const GameSetup& g) {
    return g.cfg.tau * production_gap(g, p_high) + g.base.at(worker);
}

double utility_gap(const std::vector<double>& x, double p_high, const GameSetup& g) {
    const auto& c = g.cfg;
    const int d = static_cast<int>(x.size());
    const double dg = outside_option(c.h_high, x, c) - outside_option(c.h_low, x, c);
    const double dc = cost(c.h_high, x.data(), d, c) - cost(c.h_low, x.data(), d, c);
    return c.tau * production_gap(g, p_high) + (1 - c.tau) * dg - dc;
}

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

BestResponse best_response(double p_high, const GameSetup& g, Exec exec) {
    const double common = g.cfg.tau * production_gap(g, p_high);
    const int n = static_cast<int>(g.base.size());
    BestResponse r;
    r.psi.resize(n);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) r.psi[i] = logistic(common + g.base[i]);
    } else {
        for (int i = 0; i < n; ++i) r.psi[i] = logistic(common + g.base[i]);
    }
    // Serial reduction so the result does not depend on the thread count.
    double s = 0;
    for (double v : r.psi) s += v;
    r.p_next = n > 0 ? s / n : 0.0;
    return r;
}

double log_abs_det(double phi, int n) {
    return std::log(std::abs(phi * (n - 1) - 1)) + (n - 1) * std::log(std::abs(1 + phi));
}

double phi_analytic(double p_high, const GameSetup& g) {
    const int n = static_cast<int>(g.base.size());
    if (n < 2) return 0.0;
    const double common = g.cfg.tau * production_gap(g, p_high);
    const double dcommon = g.cfg.tau * production_gap_dp(g, p_high);
    double s = 0;
    for (double b : g.base) {
        const double l = logistic(common + b);
        s += l * (1 - l);
    }
    return s / n * dcommon / (n - 1);
}

double phi_numeric(double p_high, const GameSetup& g, double step) {
    const int n = static_cast<int>(g.base.size());
    if (n < 2) return 0.0;
    const double lo = std::max(0.0, p_high - step), hi = std::min(1.0, p_high + step);
    const double d = (best_response(hi, g).p_next - best_response(lo, g).p_next) / (hi - lo);
    return d / (n - 1);
}

static bool det_condition_holds(double phi, int n) {
    return n < 2 || std::abs(phi - 1.0 / (n - 1)) >= 1e-6;
}

UniquenessReport uniqueness_diagnostic(const std::vector<double>& p_grid, const GameSetup& g) {
    const int n = static_cast<int>(g.base.size());
    UniquenessReport r;
    r.min_log_abs_det = std::numeric_limits<double>::infinity();
    for (double p : p_grid) {
        const double phi = phi_numeric(p, g);
        r.phi.push_back(phi);
        if (!det_condition_holds(phi, n)) r.flagged = true;
        r.min_log_abs_det = std::min(r.min_log_abs_det, log_abs_det(phi, n));
    }
    return r;
}

EquilibriumSolution solve_fixed_point(const GameSetup& g, const SolverOptions& opt, Exec exec) {
    EquilibriumSolution sol;
    double p = opt.p0;
    BestResponse br;
    for (int it = 1; it <= opt.max_iter; ++it) {
        br = best_response(p, g, exec);
        const double next = (1 - opt.damping) * p + opt.damping * br.p_next;
        const double res = std::abs(next - p);
        sol.trace.push_back({it, next, res});
        p = next;
        sol.iterations = it;
        sol.residual = res;
        if (res <= opt.tol) {
            sol.converged = true;
            break;
        }
    }
    // psi_star is evaluated at the returned point so that p_star and the
    // mean of psi_star agree to the solver tolerance.
    br = best_response(p, g, exec);
    sol.p_star = p;
    sol.psi_star = std::move(br.psi);
    sol.unique_flag = p > 0 && p < 1 && det_condition_holds(phi_analytic(p, g), static_cast<int>(g.base.size()));
    return sol;
}

Education sample_actions(const std::vector<double>& psi, Rng& rng) {
    Education h(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) h[i] = uniform01(rng) < psi[i] ? 1 : 0;
    return h;
}

void write_trace_csv(std::ostream& os, const EquilibriumSolution& sol) {
    os << "iteration,p,residual\n";
    os.precision(17);
    for (const auto& t : sol.trace) os << t.iteration << ',' << t.p << ',' << t.residual << '\n';
}

} // namespace labmatch
