#include "labmatch/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace labmatch {

namespace {

struct Run {
    const std::function<double(const std::vector<double>&)>& f;
    int evals = 0;
    double operator()(const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isnan(v) ? INFINITY : v;
    }
};

NelderMeadResult one_pass(Run& F, std::vector<double> x0, const NelderMeadOptions& opt, int budget) {
    const int d = static_cast<int>(x0.size());
    std::vector<std::vector<double>> S(d + 1, x0);
    std::vector<double> fv(d + 1);
    fv[0] = F(x0);
    for (int i = 0; i < d; ++i) {
        double step = opt.initial_step * std::max(std::abs(x0[i]), 0.5);
        // Shrink or flip a vertex that lands outside the feasible region.
        for (int t = 0; t < 12; ++t) {
            S[i + 1] = x0;
            S[i + 1][i] += step;
            fv[i + 1] = F(S[i + 1]);
            if (std::isfinite(fv[i + 1])) break;
            step = (t % 2 == 0) ? -step : -0.5 * step;
        }
    }
    const int start_evals = F.evals;
    std::vector<int> idx(d + 1);
    std::vector<double> c(d), xr(d), xe(d), xc(d);
    bool converged = false;
    while (F.evals - start_evals < budget) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int best = idx[0], worst = idx[d], second = idx[d - 1];
        double xspread = 0;
        for (int v = 0; v <= d; ++v)
            for (int k = 0; k < d; ++k) xspread = std::max(xspread, std::abs(S[v][k] - S[best][k]));
        if (std::isfinite(fv[worst]) && std::abs(fv[worst] - fv[best]) <= opt.ftol * (1 + std::abs(fv[best])) &&
            xspread <= opt.xtol * (1 + std::sqrt(std::inner_product(S[best].begin(), S[best].end(),
                                                                      S[best].begin(), 0.0)))) {
            converged = true;
            break;
        }
        std::fill(c.begin(), c.end(), 0.0);
        for (int v = 0; v <= d; ++v)
            if (v != worst)
                for (int k = 0; k < d; ++k) c[k] += S[v][k] / d;
        for (int k = 0; k < d; ++k) xr[k] = c[k] + (c[k] - S[worst][k]);
        const double fr = F(xr);
        if (fr < fv[best]) {
            for (int k = 0; k < d; ++k) xe[k] = c[k] + 2 * (c[k] - S[worst][k]);
            const double fe = F(xe);
            if (fe < fr) {
                S[worst] = xe;
                fv[worst] = fe;
            } else {
                S[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            S[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        for (int k = 0; k < d; ++k)
            xc[k] = outside ? c[k] + 0.5 * (xr[k] - c[k]) : c[k] + 0.5 * (S[worst][k] - c[k]);
        const double fc = F(xc);
        if (fc < (outside ? fr : fv[worst])) {
            S[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (int v = 0; v <= d; ++v) {
            if (v == best) continue;
            for (int k = 0; k < d; ++k) S[v][k] = S[best][k] + 0.5 * (S[v][k] - S[best][k]);
            fv[v] = F(S[v]);
        }
    }
    const int b = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    NelderMeadResult r;
    r.x = S[b];
    r.f = fv[b];
    r.converged = converged;
    return r;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opt) {
    Run F{f};
    NelderMeadResult r = one_pass(F, std::move(x0), opt, opt.max_evals);
    // Restarting from the best vertex guards against a collapsed simplex.
    for (int k = 0; k < opt.restarts && F.evals < opt.max_evals; ++k) {
        NelderMeadResult again = one_pass(F, r.x, opt, opt.max_evals - F.evals);
        const bool same = std::abs(again.f - r.f) <= opt.ftol * (1 + std::abs(r.f));
        if (again.f <= r.f) r = again;
        if (same) break;
    }
    r.evals = F.evals;
    return r;
}

} // namespace labmatch
