#pragma once

#include <cstdint>
#include <vector>

#include "labmatch/rng.hpp"

namespace labmatch {

double normal_cdf(double z);
double normal_pdf(double z);

struct NormalMixture {
    std::vector<double> means;
    double sd = 1.0;
    std::vector<double> weights;
};

// Mixture of N(beta * k_m, sigma^2) over the listed types with the given
// (renormalized) weights.
NormalMixture make_mixture(const std::vector<double>& capital, const std::vector<int>& types,
                           const std::vector<double>& weights, double beta, double sigma);

double mixture_cdf(double x, const NormalMixture& mix);
double mixture_pdf(double x, const NormalMixture& mix);

// Solves mixture_cdf(x) = p to 1e-10 in x. Throws std::domain_error for p
// outside (0,1).
double mixture_quantile(double p, const NormalMixture& mix);

double beta_sample(double a, double b, Rng& rng);

// R draws of U_(kappa; n) ~ Beta(kappa, n + 1 - kappa) from a stream keyed by
// (seed, kappa, n). The same (kappa, n) always yields the same draws, which
// freezes the Monte Carlo error of every a-coefficient built on them.
std::vector<double> beta_draws(std::uint64_t seed, int kappa, int n, int R);

// a(kappa, n, m; G) = E Phi((G^{-1}(U_(kappa;n)) - mu_m) / sigma), averaged
// over R beta draws taken from rng.
double a_coeff(int kappa, int n, double mu_m, const NormalMixture& G, int R, Rng& rng);

// Same expectation for several component means over a fixed set of draws;
// quantiles are computed once and shared. Edge ranks follow the order
// statistic limits: kappa = 0 gives 0 and kappa > n gives 1.
void a_coeff_common(int kappa, int n, const std::vector<double>& u, const NormalMixture& G,
                    const std::vector<double>& mu, double sigma, double* out);

} // namespace labmatch
