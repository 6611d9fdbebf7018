#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "labmatch/config.hpp"
#include "labmatch/rng.hpp"

namespace labmatch {

// Row-major n x d matrix of worker covariates.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(std::size_t(r) * c, fill) {}
    double* row(int i) { return data.data() + std::size_t(i) * cols; }
    const double* row(int i) const { return data.data() + std::size_t(i) * cols; }
    double& operator()(int i, int j) { return data[std::size_t(i) * cols + j]; }
    double operator()(int i, int j) const { return data[std::size_t(i) * cols + j]; }
};

// Education is stored as a level index: 0 = h_low, 1 = h_high.
using Education = std::vector<std::uint8_t>;

inline double edu_value(const EconomyConfig& cfg, int level) {
    return level ? cfg.h_high : cfg.h_low;
}

struct WorkerSample {
    Matrix covariates;
    std::optional<Education> education;
    std::optional<Matrix> taste_shocks;  // n x 2 type-I extreme value draws

    int size() const { return covariates.rows; }
};

double production(double h, double k, const EconomyConfig& cfg);
double production(double h, double k, double theta1, ProductionForm form);
double outside_option(double h, const double* x, int d, const EconomyConfig& cfg);
double outside_option(double h, const std::vector<double>& x, const EconomyConfig& cfg);
double cost(double h, const double* x, int d, const EconomyConfig& cfg);

struct Payoffs {
    double wage;
    double profit;
};

Payoffs bargain_payoffs(double h, double k, const std::vector<double>& x, const EconomyConfig& cfg);
Payoffs bargain_payoffs(double h, double k, double g, const EconomyConfig& cfg);

// X_i iid uniform on [covariate_low, covariate_high]^d.
WorkerSample draw_workers(const EconomyConfig& cfg, std::uint64_t seed, std::uint64_t rep = 0);
Matrix draw_taste_shocks(int n, Rng& rng);

// Outside options at both education levels for every worker.
struct OutsideValues {
    std::vector<double> low;
    std::vector<double> high;
    double mean_low = 0;
    double mean_high = 0;
};
OutsideValues outside_values(const Matrix& X, const EconomyConfig& cfg);

struct FirmPreferenceSplit {
    std::vector<int> prefers_high;
    std::vector<int> prefers_low;
    double q_high = 0;
    std::vector<double> posterior_high;  // aligned with prefers_high
    std::vector<double> posterior_low;   // aligned with prefers_low
    std::uint64_t mask = 0;              // bit m set iff type m prefers high

    int case_index() const { return static_cast<int>(prefers_low.size()); }
    bool high(int m) const { return (mask >> m) & 1u; }
    // Types preferring level j (j = 1 high, 0 low) and their posterior masses.
    const std::vector<int>& preferring(int j) const { return j ? prefers_high : prefers_low; }
    const std::vector<int>& other(int j) const { return j ? prefers_low : prefers_high; }
    const std::vector<double>& posterior_pref(int j) const { return j ? posterior_high : posterior_low; }
    const std::vector<double>& posterior_other(int j) const { return j ? posterior_low : posterior_high; }
    double q_pref(int j) const { return j ? q_high : 1.0 - q_high; }
};

FirmPreferenceSplit split_from_mask(std::uint64_t mask, const std::vector<double>& capital_mass);
FirmPreferenceSplit homogeneous_split(bool all_high, int n_types);

// Firm type m prefers high iff rho(k_m, h_high) >= rho(k_m, h_low) with the
// outside option replaced by its mean at each education level.
FirmPreferenceSplit firm_preference_split(const EconomyConfig& cfg, double gbar_low, double gbar_high);
FirmPreferenceSplit firm_preference_split(const EconomyConfig& cfg, const Matrix& covariates);

// True when the prefers-high set is an upper set of the capital ordering.
bool upward_closed(const FirmPreferenceSplit& s, int n_types);

// Spot check of f >= g over a covariate sample at both education levels and
// every capital value. A negative-profit pair is reported, never clamped.
struct IrReport {
    long checked = 0;
    long violations = 0;
    double worst_gap = 0;  // min over pairs of f - g
    bool ok() const { return violations == 0; }
    std::string message() const;
};
IrReport ir_report(const EconomyConfig& cfg, const Matrix& covariates);

} // namespace labmatch
