#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace labmatch {

enum class ProductionForm { multiplicative, additive };
enum class OutsideForm { g1_exp_interaction, g2_level_exp };
enum class CapitalDraw { iid, exact_counts };

// Which firms the order-statistic threshold in the matching probabilities is
// taken over: the other b - 1 firms of a pool (exclusive, exact for serial
// dictatorship) or all b of them (inclusive).
enum class OrderStatConvention { exclusive, inclusive };

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 500;
    double damping = 1.0;
    double p0 = 0.5;
};

// Cost of schooling c0(h, x). Only differences across education levels enter.
using CostFn = std::function<double(double h, const std::vector<double>& x)>;

struct EconomyConfig {
    int n_workers = 500;
    int n_firms = 500;
    double h_low = 0.0;
    double h_high = 1.0;
    std::vector<double> capital_support{0.5, 1.0};
    std::vector<double> capital_mass{0.5, 0.5};

    double theta1 = 1.0;
    std::vector<double> theta2{1.0};
    double beta = 0.0;
    double sigma = 1.0;
    double tau = 0.5;

    ProductionForm production = ProductionForm::multiplicative;
    OutsideForm outside = OutsideForm::g1_exp_interaction;
    int covariate_dim = 1;
    double covariate_low = 0.0;
    double covariate_high = 1.0;
    CapitalDraw capital_draw = CapitalDraw::iid;

    int beta_draws = 100;
    int support_nodes = 0;  // 0 picks max(ceil(n/50), 10) per axis
    OrderStatConvention order_stat = OrderStatConvention::exclusive;
    SolverOptions solver;

    CostFn cost;  // empty means c0 = 0

    int n() const { return n_workers; }
    int n_types() const { return static_cast<int>(capital_support.size()); }
    std::vector<double> theta() const;
    void set_theta(const std::vector<double>& th);
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

// Raised when a solver or estimator cannot produce a result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Throws ConfigError listing every violated invariant.
void validate(const EconomyConfig& cfg);
std::vector<std::string> check(const EconomyConfig& cfg);

std::string to_string(ProductionForm f);
std::string to_string(OutsideForm f);
std::string to_string(CapitalDraw d);
std::string to_string(OrderStatConvention c);

} // namespace labmatch
