#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace heatgp {

// Box-constrained quasi-Newton (BFGS with central-difference gradients and
// Armijo backtracking). Intended for the 2-3 dimensional log-parameter
// likelihood surfaces; objectives may return +inf to veto a region.
struct OptimResult {
    Eigen::VectorXd x;
    double f = 0.0;
    bool converged = false;
    int evals = 0;
};

struct OptimOptions {
    int max_iters = 120;
    double grad_tol = 1e-7;
    double step_tol = 1e-10;
    double fd_step = 1e-5;
};

OptimResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi, const OptimOptions& opts = {});

// Runs one BFGS per start and keeps the best finite minimum; throws
// numerical_error if every start diverges.
OptimResult minimize_multistart(const std::function<double(const Eigen::VectorXd&)>& f,
                                const std::vector<Eigen::VectorXd>& starts,
                                const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                const OptimOptions& opts = {});

}  // namespace heatgp
