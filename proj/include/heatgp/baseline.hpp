#pragma once

#include "heatgp/gp.hpp"

namespace heatgp {

// Plain Euclidean GP with the squared-exponential kernel; the comparison
// baseline for every benchmark, operating on ambient coordinates.

struct RbfParams {
    double l = 1.0;
    double sigma_r = 1.0;
};

double rbf_kernel(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const RbfParams& p);

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& x, const RbfParams& p);
Eigen::MatrixXd rbf_cross(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_star,
                          const RbfParams& p);

struct RbfFit {
    RbfParams params;
    double sigma_noise = 0.0;
    double lml = 0.0;
};

// Type-II maximum likelihood over (l, sigma_r, sigma_noise) by multistart
// quasi-Newton on log-parameters.
RbfFit fit_rbf_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int multistarts = 3);

Predictive predict_rbf_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RbfFit& fit,
                          const Eigen::MatrixXd& x_star, bool with_variance = false);

// ---- benchmark ground truths -------------------------------------------------

struct BenchmarkSpec {
    std::string name;        // "ushape" or "swissroll"
    int n_train = 20;
    double noise_sd = 0.1;
    int grid_target = 450;
    std::uint64_t seed = 1;
};

// Deterministic test functions. U-shape: linear ramp in centerline arc length
// from -6 at the lower-right tip to +6 at the upper-right tip, constant across
// the arm. Swiss roll: 3 sin(s/6) + 0.4 (z - 5) with s the spiral arc length
// from r = 0.
double benchmark_truth(const BenchmarkSpec& spec, const ChartPoint& x);

double ushape_truth(double x, double y);
double swissroll_truth(double r, double z);

// Arc length of the spiral (r cos r, r sin r) from 0 to r.
double swissroll_arclength(double r);

}  // namespace heatgp
