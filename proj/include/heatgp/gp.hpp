#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "heatgp/heat_kernel.hpp"

namespace heatgp {

struct Dataset {
    Eigen::MatrixXd points;  // n x d chart coordinates
    Eigen::VectorXd y;
    Eigen::VectorXd center_offset;  // subtracted from raw coordinates, empty if none

    std::int64_t n() const { return points.rows(); }
    int dim() const { return static_cast<int>(points.cols()); }
};

// Covariance matrices over the diffusion-time grid {dt, 2dt, ..., T dt}.
// sigma holds the symmetrized, PSD-repaired estimates actually used by the
// likelihood; sigma_raw keeps the unsymmetrized counts for diagnostics.
struct CovarianceGrid {
    std::vector<double> t_grid;
    std::vector<Eigen::MatrixXd> sigma;
    std::vector<Eigen::MatrixXd> sigma_raw;
    std::vector<Eigen::MatrixXd> stderr_;   // per-entry binomial errors
    std::vector<double> spectral_floor;     // noise floor applied per t
    SimConfig sim;

    int t_index(double t) const;  // closest grid entry, throws if far
};

struct Hyperparams {
    double t = 0.0;
    double sigma_h = 1.0;
    double sigma_noise = 0.0;
};

struct Predictive {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // empty when no test self-covariance was given
    std::optional<Eigen::MatrixXd> full_cov;
    int variance_clips = 0;
    bool has_variance() const { return variance.size() > 0; }
};

// Loads one ensemble per training point. Implementations may simulate on
// demand, read a cache, or index into memory; i runs over training rows.
using EnsembleSource = std::function<PathEnsemble(std::int64_t i)>;

// Row i of every per-t raw matrix comes from ensemble i (Algorithm flow:
// simulate at s_i, count hits near every s_j). The symmetrized PSD repair of
// (raw + raw^T)/2 is stored in sigma. Ensembles must share one SimConfig.
CovarianceGrid build_covariance_grid(const Domain& domain, const Eigen::MatrixXd& points,
                                     const EnsembleSource& source, const WindowPolicy& policy,
                                     Exec exec = Exec::OpenMP);

// Eigenvalue clipping to the nearest PSD matrix (Frobenius) plus a relative
// jitter of 1e-8 * trace/n on the diagonal. Throws on non-symmetric input.
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& m);

// Repair for Monte-Carlo covariance estimates: eigenvalues below the counting
// noise scale are floored at it rather than clipped to zero. A clipped-to-zero
// direction claims infinite precision the estimator does not have, which
// spuriously rewards heavily rank-deficient diffusion times and destabilizes
// predictions; the floor keeps those directions at the magnitude of the
// estimation error. noise_scale = 0 degrades to plain clipping. The floor
// actually applied (max of noise_scale and the empirical |min eigenvalue|)
// is written to *floor_out when given.
Eigen::MatrixXd noise_floor_repair(const Eigen::MatrixXd& m, double noise_scale,
                                   double* floor_out = nullptr);

// 3 sqrt(n) * mean nonzero stderr: eigenvalue perturbation scale of the
// estimated matrix under independent entry noise.
double covariance_noise_scale(const Eigen::MatrixXd& stderr_entries);

// Exact log marginal likelihood via Cholesky of sigma_h^2 * Sigma_t +
// sigma_noise^2 * I. The magnitude scale is applied here, not in the grid.
double log_marginal_likelihood(const Eigen::MatrixXd& sigma_t, const Hyperparams& hp,
                               const Eigen::VectorXd& y);

struct FitOptions {
    int multistarts = 3;
    double sigma_noise_floor_rel = 1e-4;  // relative to sd(y)
};

struct PerTimeFit {
    double t = 0.0;
    double sigma_h = 0.0;
    double sigma_noise = 0.0;
    double lml = 0.0;
    bool converged = false;
};

struct FitResult {
    Hyperparams hp;
    std::vector<PerTimeFit> table;
    bool unimodal = true;  // single local max of lml over t (flagged otherwise)
};

// Profile over the discrete t grid: per t, maximize (sigma_h, sigma_noise)
// by multistart quasi-Newton on log-parameters; global argmax wins, ties
// broken toward smaller t.
FitResult fit(const CovarianceGrid& grid, const Eigen::VectorXd& y,
              const FitOptions& opts = {});

// Predictive distribution at test points. cross_cov is n x m* with entries
// K(s_i, s*_j) taken from the training ensembles; variance requires the
// test-point self-densities (diagonal) or a full m* x m* self-covariance,
// which needs test-point ensembles.
Predictive predict(const CovarianceGrid& grid, const Hyperparams& hp, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& cross_cov,
                   const std::optional<Eigen::VectorXd>& test_self_diag = std::nullopt,
                   const std::optional<Eigen::MatrixXd>& test_self_cov = std::nullopt);

// Same algebra with the chosen-t covariance supplied directly. weight_floor
// is the spectral noise floor of sigma_t (0 for exact matrices): prediction
// weights are projected off the eigendirections at or below it, because those
// directions are estimation noise and only amplify cross-covariance error.
Predictive predict_at(const Eigen::MatrixXd& sigma_t, const Hyperparams& hp,
                      const Eigen::VectorXd& y, const Eigen::MatrixXd& cross_cov,
                      const std::optional<Eigen::VectorXd>& test_self_diag = std::nullopt,
                      const std::optional<Eigen::MatrixXd>& test_self_cov = std::nullopt,
                      double weight_floor = 0.0);

}  // namespace heatgp
