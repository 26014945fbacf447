#pragma once

#include "heatgp/gp.hpp"

namespace heatgp {

// Inducing-point construction and the low-rank (Deterministic Inducing
// Conditional) algebra. Every covariance here is estimated from BM ensembles
// started at the inducing points only; nothing in this module forms an n x n
// matrix (see alloc_stats, which the resource tests assert on).

struct InducingSet {
    Eigen::MatrixXd points;  // m x d
    SimConfig sim;
};

// Per-diffusion-time inducing covariances: sigma_uu (m x m, repaired) and
// sigma_uf (m x n cross-covariances to the training points).
struct SparseGrid {
    std::vector<double> t_grid;
    std::vector<Eigen::MatrixXd> sigma_uu;
    std::vector<Eigen::MatrixXd> sigma_uf;
    SimConfig sim;

    int t_index(double t) const;
};

struct SparseModel {
    Eigen::MatrixXd inducing_points;  // m x d
    Eigen::MatrixXd sigma_uu;         // at the chosen t, PSD-repaired
    Eigen::MatrixXd sigma_uf;
    Hyperparams hp;
};

// Regular chart grid clipped to the domain; the achieved count may differ
// slightly from m_target. Deterministic.
std::vector<ChartPoint> place_inducing_grid(const Domain& domain, const Box& box, int m_target);
Eigen::MatrixXd place_inducing_matrix(const Domain& domain, const Box& box, int m_target);

// Builds sigma_uu[t] and sigma_uf[t] from the m inducing ensembles.
SparseGrid build_sparse_grid(const Domain& domain, const Eigen::MatrixXd& inducing,
                             const Eigen::MatrixXd& train_points, const EnsembleSource& source,
                             const WindowPolicy& policy, Exec exec = Exec::OpenMP);

// Monte-Carlo inducing covariances are routinely rank-deficient: eigenvalues
// below the counting-noise scale carry no signal, and inverting them blows the
// Q matrices up by orders of magnitude. Eigendirections at or below
// noise_scale are therefore given the largest eigenvalue instead, which makes
// their contribution to Q negligible while every resolved direction passes
// through exactly. Applied when estimating sigma_uu, never inside the
// algebraic operations below.
Eigen::MatrixXd regularize_inducing_cov(const Eigen::MatrixXd& sym_uu, double noise_scale);

// 3 * sqrt(m) * mean nonzero entry stderr: the eigenvalue perturbation scale
// of an m x m symmetric matrix under iid entry noise.
double inducing_noise_scale(const Eigen::MatrixXd& stderr_uu);

// Q_ab = S_au S_uu^{-1} S_ub via Cholesky solves (never an explicit inverse).
// Adds jitter only if the plain factorization fails.
Eigen::MatrixXd build_q(const Eigen::MatrixXd& sigma_uu, const Eigen::MatrixXd& sigma_au,
                        const Eigen::MatrixXd& sigma_ub);

// N(0, sh^2 Q_ff + sn^2 I) log density of y, evaluated with the low-rank
// Woodbury identities in O(n m^2). sigma_noise must be positive: the DIC
// covariance is rank-deficient without the noise term.
double sparse_log_marginal(const SparseModel& model, const Eigen::VectorXd& y);

// Predictive mean/variance at test points from sigma_u_star (m x m*), again
// without forming anything n x n. Negative variances are clipped and counted.
Predictive sparse_predict(const SparseModel& model, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& sigma_u_star);

// Same profile-over-t selection as the dense fit, driven by the sparse
// likelihood.
FitResult sparse_fit(const SparseGrid& grid, const Eigen::VectorXd& y,
                     const FitOptions& opts = {});

SparseModel make_sparse_model(const SparseGrid& grid, const Eigen::MatrixXd& inducing,
                              const Hyperparams& hp);

// Instrumentation for the resource contract: high-water marks of matrices
// allocated by this module's operations.
namespace alloc_stats {
void reset();
std::size_t max_min_dim();   // largest min(rows, cols) seen
std::size_t max_elements();  // largest rows*cols seen
}  // namespace alloc_stats

}  // namespace heatgp
