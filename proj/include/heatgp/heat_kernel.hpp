#pragma once

#include <cstdint>
#include <string>

#include "heatgp/bm_sim.hpp"

namespace heatgp {

// Transition-density estimate at one (target, diffusion time): k hits out of
// N paths inside a chart-coordinate hypercube window of half-width w, divided
// by the window volume V(w) = (2w)^d * sqrt(det g(target)).
struct KernelEstimate {
    double value = 0.0;     // density w.r.t. the volume form, >= 0
    double stderr_ = 0.0;   // binomial standard-error bound
    double window = 0.0;    // half-width w
    std::int64_t hits = 0;
    std::int64_t n_paths = 0;
    bool zero_hits = false;

    // context kept for error_budget()
    double t = 0.0;
    double dist2 = 0.0;  // squared chart distance target-start
};

struct WindowPolicy {
    enum class Mode { Fixed, Optimal };
    Mode mode = Mode::Optimal;
    double fixed_w = 0.0;          // required for Fixed; pilot width otherwise (0 -> 0.25*sqrt(t))
    double pilot_fraction = 0.3;   // share of paths used by the plug-in pilot pass
    // Applied on top of the plug-in width. The single-entry optimum trades
    // bias against variance per estimate; matrix-level fits prefer slightly
    // wider windows (lower variance, smooth extra bias).
    double width_scale = 1.5;
};

// Euclidean heat kernel (2*pi*t)^{-d/2} exp(-|s0-s|^2 / (2t)).
double closed_form_kernel(int d, const Eigen::VectorXd& s0, const Eigen::VectorXd& s, double t);

// Paths whose chart coordinates all lie within (target-w, target+w) at the
// given step. Serial and OpenMP variants count identically.
std::int64_t count_window_hits(const PathEnsemble& e, int step_index, const double* target,
                               double w, Exec exec = Exec::Serial);

// Single-window estimator; k = 0 yields value 0 with zero_hits set.
KernelEstimate estimate_density(const PathEnsemble& e, const ChartPoint& target,
                                int step_index, double w, const Domain& domain);

// Plug-in optimal window (A^{-2} K^{-1} t^2 / N)^{1/(d+4)}, clamped to
// [1e-3*sqrt(t), 0.5*sqrt(t)]. Matches the d=1 and d=2 scalings exactly.
double optimal_window(double k_pilot, double t, std::int64_t n, int d, double a_factor);

struct ErrorBudget {
    double numerical = 0.0;    // O(w^2) term; signed Euclidean constant
    double monte_carlo = 0.0;  // binomial standard error
};
ErrorBudget error_budget(const KernelEstimate& est, int d);

// Minimum path count for a target absolute error. Exact inversion of the
// error scaling for d = 1 and d = 2; for d > 2 no closed-form bound exists
// and the d=2 bound is returned with a warning.
std::int64_t min_paths_for_error(double err_target, double k_value, double t, double a_factor,
                                 int d, std::string* warning = nullptr);

// Window for a matrix column: depends on the target and diffusion time only,
// never on the path start. Per-entry windows would measure every matrix entry
// through a different mollifier, leaving a systematic indefinite component
// that does not shrink with the path count; column-uniform windows keep the
// symmetrized matrix positive semidefinite up to O(w^4). The plug-in density
// is the flat-space magnitude (2 pi t)^{-d/2} / sqrt(det g).
double column_window(const Domain& domain, const WindowPolicy& policy, const ChartPoint& target,
                     double t, std::int64_t n_paths);

// Density estimates for every (step, target) pair of one ensemble using the
// column windows above (fixed_w in Fixed mode).
struct DensityBlock {
    Eigen::MatrixXd value;    // n_steps x n_targets
    Eigen::MatrixXd stderr_;  // same shape
    Eigen::MatrixXd window;   // half-width actually used
};
DensityBlock density_block(const Domain& domain, const PathEnsemble& e,
                           const Eigen::MatrixXd& targets,  // n_targets x d
                           const WindowPolicy& policy, Exec exec = Exec::OpenMP);

// Same estimator restricted to a single step (used for prediction-time
// cross-covariances at the chosen diffusion time).
DensityBlock density_block_at_step(const Domain& domain, const PathEnsemble& e, int step_index,
                                   const Eigen::MatrixXd& targets, const WindowPolicy& policy,
                                   Exec exec = Exec::OpenMP);

}  // namespace heatgp
