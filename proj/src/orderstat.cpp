#include "labmatch/orderstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace labmatch {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double normal_pdf(double z) { return 0.3989422804014327 * std::exp(-0.5 * z * z); }

NormalMixture make_mixture(const std::vector<double>& capital, const std::vector<int>& types,
                           const std::vector<double>& weights, double beta, double sigma) {
    NormalMixture mix;
    mix.sd = sigma;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < types.size(); ++i) {
        mix.means.push_back(beta * capital[types[i]]);
        mix.weights.push_back(weights[i] / total);
    }
    return mix;
}

double mixture_cdf(double x, const NormalMixture& mix) {
    double s = 0;
    for (std::size_t m = 0; m < mix.means.size(); ++m)
        s += mix.weights[m] * normal_cdf((x - mix.means[m]) / mix.sd);
    return s;
}

double mixture_pdf(double x, const NormalMixture& mix) {
    double s = 0;
    for (std::size_t m = 0; m < mix.means.size(); ++m)
        s += mix.weights[m] * normal_pdf((x - mix.means[m]) / mix.sd);
    return s / mix.sd;
}

double mixture_quantile(double p, const NormalMixture& mix) {
    if (!(p > 0 && p < 1)) throw std::domain_error("mixture_quantile: p must lie in (0,1)");
    const auto [mn, mx] = std::minmax_element(mix.means.begin(), mix.means.end());
    double lo = *mn - 10 * mix.sd, hi = *mx + 10 * mix.sd;
    while (mixture_cdf(lo, mix) > p) lo -= 10 * mix.sd;
    while (mixture_cdf(hi, mix) < p) hi += 10 * mix.sd;

    // Newton steps guarded by the bracket, falling back to bisection when a
    // step would leave it.
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
        const double fx = mixture_cdf(x, mix) - p;
        if (fx == 0) return x;
        if (fx < 0) lo = x;
        else hi = x;
        const double d = mixture_pdf(x, mix);
        double nx = d > 0 ? x - fx / d : lo;
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        const double step = std::abs(nx - x);
        x = nx;
        if (step < 1e-12 || hi - lo < 1e-10) break;
    }
    return x;
}

double beta_sample(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    for (;;) {
        const double x = ga(rng);
        const double y = gb(rng);
        const double u = x / (x + y);
        if (u > 0 && u < 1) return u;
    }
}

std::vector<double> beta_draws(std::uint64_t seed, int kappa, int n, int R) {
    Rng rng = make_rng(seed, Stream::beta_bank, static_cast<std::uint64_t>(kappa),
                       static_cast<std::uint64_t>(n));
    std::vector<double> u(R);
    for (double& v : u) v = beta_sample(kappa, n + 1 - kappa, rng);
    return u;
}

void a_coeff_common(int kappa, int n, const std::vector<double>& u, const NormalMixture& G,
                    const std::vector<double>& mu, double sigma, double* out) {
    if (kappa <= 0) {
        std::fill(out, out + mu.size(), 0.0);
        return;
    }
    if (kappa > n) {
        std::fill(out, out + mu.size(), 1.0);
        return;
    }
    std::fill(out, out + mu.size(), 0.0);
    for (double ui : u) {
        const double x = mixture_quantile(ui, G);
        for (std::size_t m = 0; m < mu.size(); ++m) out[m] += normal_cdf((x - mu[m]) / sigma);
    }
    for (std::size_t m = 0; m < mu.size(); ++m) out[m] /= static_cast<double>(u.size());
}

double a_coeff(int kappa, int n, double mu_m, const NormalMixture& G, int R, Rng& rng) {
    std::vector<double> u;
    if (kappa >= 1 && kappa <= n) {
        u.resize(R);
        for (double& v : u) v = beta_sample(kappa, n + 1 - kappa, rng);
    }
    double out = 0;
    a_coeff_common(kappa, n, u, G, {mu_m}, G.sd, &out);
    return out;
}

} // namespace labmatch
