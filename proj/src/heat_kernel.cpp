#include "heatgp/heat_kernel.hpp"

#include <cmath>

#include "heatgp/errors.hpp"

namespace heatgp {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::int64_t count_slice(const float* slice, std::int64_t n_paths, int d,
                         const double* target, double w) {
    std::int64_t k = 0;
    if (d == 1) {
        const double t0 = target[0];
        for (std::int64_t j = 0; j < n_paths; ++j)
            k += std::abs(static_cast<double>(slice[j]) - t0) < w;
    } else if (d == 2) {
        const double t0 = target[0], t1 = target[1];
        for (std::int64_t j = 0; j < n_paths; ++j) {
            const double a = std::abs(static_cast<double>(slice[2 * j]) - t0);
            const double b = std::abs(static_cast<double>(slice[2 * j + 1]) - t1);
            k += (a < w) & (b < w);
        }
    } else {
        for (std::int64_t j = 0; j < n_paths; ++j) {
            bool in = true;
            for (int c = 0; c < d; ++c)
                in &= std::abs(static_cast<double>(slice[j * d + c]) - target[c]) < w;
            k += in;
        }
    }
    return k;
}

double sqrt_det_metric(const Domain& domain, const ChartPoint& x) {
    if (domain.flat()) return 1.0;
    return std::sqrt(metric_at(domain, x).det_g);
}

// Windows near the boundary only see part of their nominal volume; without
// this correction every near-boundary density is biased low by the clipped
// mass.
double window_inside_fraction(const Domain& domain, const double* target, double w, int d) {
    ChartPoint x(d);
    for (int k = 0; k < d; ++k) x[k] = target[k];
    return domain.visible_window_fraction(x, w);
}

double column_window_impl(const WindowPolicy& policy, double t, std::int64_t n_paths,
                          double sqrt_det, double bnd_dist, int d) {
    if (policy.mode == WindowPolicy::Mode::Fixed) {
        if (policy.fixed_w <= 0.0) throw config_error("fixed window policy needs fixed_w > 0");
        return policy.fixed_w;
    }
    // near a Neumann wall the density is locally even across the boundary, so
    // a window clipped by the exact visible-area correction stays unbiased to
    // the same order as an interior one; no boundary cap needed
    (void)bnd_dist;
    const double k_plug = std::pow(2.0 * kPi * t, -0.5 * d) / sqrt_det;
    const double w =
        optimal_window(k_plug, t, n_paths, d, static_cast<double>(d)) *
        std::max(policy.width_scale, 1e-3);
    return std::min(w, 0.5 * std::sqrt(t));
}

KernelEstimate make_estimate(const Domain& domain, const double* target, std::int64_t k,
                             std::int64_t n, double w, double sqrt_det, int d, double t,
                             double dist2) {
    KernelEstimate est;
    est.hits = k;
    est.n_paths = n;
    est.window = w;
    est.t = t;
    est.dist2 = dist2;
    if (k == 0) {
        est.zero_hits = true;
        return est;
    }
    const double frac = window_inside_fraction(domain, target, w, d);
    const double vol = std::pow(2.0 * w, d) * sqrt_det * std::max(frac, 1.0 / 512.0);
    est.value = static_cast<double>(k) / (static_cast<double>(n) * vol);
    est.stderr_ = std::sqrt(est.value / (static_cast<double>(n) * vol));
    return est;
}

}  // namespace

double closed_form_kernel(int d, const Eigen::VectorXd& s0, const Eigen::VectorXd& s,
                          double t) {
    if (t <= 0.0) throw numerical_error("heat kernel requires t > 0");
    const double r2 = (s0 - s).squaredNorm();
    return std::pow(2.0 * kPi * t, -0.5 * d) * std::exp(-r2 / (2.0 * t));
}

std::int64_t count_window_hits(const PathEnsemble& e, int step_index, const double* target,
                               double w, Exec exec) {
    const float* slice = e.step_slice(step_index);
    const std::int64_t n = e.config.n_paths;
    const int d = e.dim;
    if (exec == Exec::Serial) return count_slice(slice, n, d, target, w);
    std::int64_t k = 0;
#pragma omp parallel for reduction(+ : k) schedule(static)
    for (std::int64_t j = 0; j < n; ++j)
        k += count_slice(slice + j * d, 1, d, target, w);
    return k;
}

KernelEstimate estimate_density(const PathEnsemble& e, const ChartPoint& target,
                                int step_index, double w, const Domain& domain) {
    if (step_index < 1 || step_index > e.config.n_steps)
        throw config_error("step index out of range");
    if (w <= 0.0) throw config_error("window must be positive");
    const std::int64_t k = count_window_hits(e, step_index, target.data(), w);
    return make_estimate(domain, target.data(), k, e.config.n_paths, w,
                         sqrt_det_metric(domain, target), e.dim, e.t_of_step(step_index),
                         (target - e.start).squaredNorm());
}

double optimal_window(double k_pilot, double t, std::int64_t n, int d, double a_factor) {
    if (k_pilot <= 0.0 || t <= 0.0 || n < 1 || a_factor <= 0.0)
        throw numerical_error("optimal_window requires positive K, t, N, A");
    const double w = std::pow(
        t * t / (a_factor * a_factor * k_pilot * static_cast<double>(n)), 1.0 / (d + 4));
    const double root_t = std::sqrt(t);
    return std::clamp(w, 1e-3 * root_t, 0.5 * root_t);
}

ErrorBudget error_budget(const KernelEstimate& est, int d) {
    ErrorBudget b;
    b.monte_carlo = est.stderr_;
    const double w2 = est.window * est.window;
    b.numerical = est.value * (est.dist2 - d * est.t) / (6.0 * est.t) * (w2 / est.t);
    return b;
}

std::int64_t min_paths_for_error(double err_target, double k_value, double t, double a_factor,
                                 int d, std::string* warning) {
    if (err_target <= 0.0 || k_value <= 0.0 || t <= 0.0 || a_factor <= 0.0)
        throw numerical_error("min_paths_for_error requires positive inputs");
    const double rel = err_target / k_value;
    double n;
    if (d == 1) {
        n = std::sqrt(a_factor) / (k_value * std::sqrt(t)) * std::pow(rel, -2.5);
    } else {
        // total error ~ A^{1/3} K^{2/3} t^{-1/3} N^{-1/3} inverted for N
        n = a_factor / (k_value * t) * std::pow(rel, -3.0);
        if (d > 2 && warning)
            *warning = "no closed-form bound for d > 2; returning the d = 2 bound";
    }
    return static_cast<std::int64_t>(std::ceil(n));
}

double column_window(const Domain& domain, const WindowPolicy& policy, const ChartPoint& target,
                     double t, std::int64_t n_paths) {
    return column_window_impl(policy, t, n_paths, sqrt_det_metric(domain, target),
                              domain.boundary_distance(target), domain.dim());
}

namespace {

DensityBlock density_block_impl(const Domain& domain, const PathEnsemble& e, int step_lo,
                                int step_hi, const Eigen::MatrixXd& targets,
                                const WindowPolicy& policy, Exec exec) {
    const int d = e.dim;
    if (targets.cols() != d) throw config_error("target dimension mismatch");
    if (d > 8) throw config_error("chart dimension > 8 not supported");
    const auto m = static_cast<int>(targets.rows());
    const int n_steps = step_hi - step_lo + 1;

    Eigen::VectorXd sqrt_det(m), dist2(m), bnd(m);
    for (int j = 0; j < m; ++j) {
        sqrt_det[j] = sqrt_det_metric(domain, targets.row(j).transpose());
        dist2[j] = (targets.row(j).transpose() - e.start).squaredNorm();
        bnd[j] = domain.boundary_distance(targets.row(j).transpose());
    }

    DensityBlock out;
    out.value.resize(n_steps, m);
    out.stderr_.resize(n_steps, m);
    out.window.resize(n_steps, m);

    const std::int64_t total = static_cast<std::int64_t>(n_steps) * m;
    auto body = [&](std::int64_t idx) {
        const int si = static_cast<int>(idx / m);
        const int j = static_cast<int>(idx % m);
        const int step = step_lo + si;
        const double t = e.t_of_step(step);
        double tg[8];
        for (int c = 0; c < d; ++c) tg[c] = targets(j, c);
        const double w = column_window_impl(policy, t, e.config.n_paths, sqrt_det[j], bnd[j], d);
        const std::int64_t k = count_slice(e.step_slice(step), e.config.n_paths, d, tg, w);
        const KernelEstimate est =
            make_estimate(domain, tg, k, e.config.n_paths, w, sqrt_det[j], d, t, dist2[j]);
        // first-order window debias: the counted mass over a cube of
        // half-width w inflates the density by 1 + (|s-s0|^2 - d t) w^2 /
        // (6 t^2); dividing it out leaves O(w^4) so the symmetrized matrix
        // stays numerically PSD
        const double taylor =
            std::max(1.0 + (dist2[j] - d * t) / (6.0 * t) * (w * w / t), 0.25);
        out.value(si, j) = est.value / taylor;
        out.stderr_(si, j) = est.stderr_ / taylor;
        out.window(si, j) = w;
    };

    if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
        for (std::int64_t idx = 0; idx < total; ++idx) body(idx);
    } else {
        for (std::int64_t idx = 0; idx < total; ++idx) body(idx);
    }
    return out;
}

}  // namespace

DensityBlock density_block(const Domain& domain, const PathEnsemble& e,
                           const Eigen::MatrixXd& targets, const WindowPolicy& policy,
                           Exec exec) {
    return density_block_impl(domain, e, 1, e.config.n_steps, targets, policy, exec);
}

DensityBlock density_block_at_step(const Domain& domain, const PathEnsemble& e, int step_index,
                                   const Eigen::MatrixXd& targets, const WindowPolicy& policy,
                                   Exec exec) {
    if (step_index < 1 || step_index > e.config.n_steps)
        throw config_error("step index out of range");
    return density_block_impl(domain, e, step_index, step_index, targets, policy, exec);
}

}  // namespace heatgp
