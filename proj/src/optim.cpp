#include "heatgp/optim.hpp"

#include <cmath>
#include <limits>

#include "heatgp/errors.hpp"

namespace heatgp {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, double h, int& evals) {
    const auto n = x.size();
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] = std::min(x[i] + h, hi[i]);
        xm[i] = std::max(x[i] - h, lo[i]);
        const double denom = xp[i] - xm[i];
        if (denom <= 0.0) {
            g[i] = 0.0;
            continue;
        }
        g[i] = (f(xp) - f(xm)) / denom;
        evals += 2;
    }
    return g;
}

}  // namespace

OptimResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi, const OptimOptions& opts) {
    const auto n = x0.size();
    OptimResult res;
    res.x = clamp_box(x0, lo, hi);
    res.f = f(res.x);
    res.evals = 1;
    if (!std::isfinite(res.f)) return res;

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = fd_gradient(f, res.x, lo, hi, opts.fd_step, res.evals);

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (g.norm() < opts.grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = -(H * g);
        if (dir.dot(g) >= 0.0) {  // not a descent direction; reset
            H.setIdentity();
            dir = -g;
        }
        // Armijo backtracking
        double step = 1.0;
        const double slope = g.dot(dir);
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = clamp_box(res.x + step * dir, lo, hi);
            f_new = f(x_new);
            ++res.evals;
            if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) {
            res.converged = true;  // no further progress along this direction
            break;
        }
        const Eigen::VectorXd s = x_new - res.x;
        if (s.norm() < opts.step_tol) {
            res.x = x_new;
            res.f = f_new;
            res.converged = true;
            break;
        }
        Eigen::VectorXd g_new = fd_gradient(f, x_new, lo, hi, opts.fd_step, res.evals);
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            const double rho = 1.0 / sy;
            H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
                rho * s * s.transpose();
        } else {
            H.setIdentity();
        }
        res.x = x_new;
        res.f = f_new;
        g = g_new;
    }
    return res;
}

OptimResult minimize_multistart(const std::function<double(const Eigen::VectorXd&)>& f,
                                const std::vector<Eigen::VectorXd>& starts,
                                const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                const OptimOptions& opts) {
    OptimResult best;
    best.f = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        OptimResult r = minimize_bfgs(f, s, lo, hi, opts);
        if (std::isfinite(r.f) && r.f < best.f) best = r;
    }
    if (!std::isfinite(best.f))
        throw numerical_error("all optimizer starts diverged");
    return best;
}

}  // namespace heatgp
