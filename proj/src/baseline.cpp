#include "heatgp/baseline.hpp"

#include <cmath>

#include "heatgp/errors.hpp"
#include "heatgp/optim.hpp"

namespace heatgp {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

double rbf_kernel(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const RbfParams& p) {
    if (x1.size() != x2.size()) throw config_error("rbf_kernel: dimension mismatch");
    const double r2 = (x1 - x2).squaredNorm();
    return p.sigma_r * p.sigma_r * std::exp(-r2 / (2.0 * p.l * p.l));
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& x, const RbfParams& p) {
    const auto n = x.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = rbf_kernel(x.row(i).transpose(), x.row(j).transpose(), p);
            g(i, j) = v;
            g(j, i) = v;
        }
    return g;
}

Eigen::MatrixXd rbf_cross(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_star,
                          const RbfParams& p) {
    Eigen::MatrixXd g(x.rows(), x_star.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x_star.rows(); ++j)
            g(i, j) = rbf_kernel(x.row(i).transpose(), x_star.row(j).transpose(), p);
    return g;
}

namespace {

double rbf_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RbfParams& p,
               double sigma_noise) {
    Eigen::MatrixXd cov = rbf_gram(x, p);
    cov.diagonal().array() += sigma_noise * sigma_noise;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw numerical_error("rbf likelihood Cholesky failed");
    const Eigen::VectorXd alpha = llt.solve(y);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * y.dot(alpha) - 0.5 * logdet -
           0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

struct PairDistances {
    double min = 1.0;
    double median = 1.0;
};

PairDistances pair_distances(const Eigen::MatrixXd& x) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j)
            d.push_back((x.row(i) - x.row(j)).norm());
    if (d.empty()) return {};
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    PairDistances out;
    out.median = std::max(d[d.size() / 2], 1e-8);
    out.min = std::max(*std::min_element(d.begin(), d.end()), 1e-8 * out.median);
    return out;
}

}  // namespace

RbfFit fit_rbf_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int multistarts) {
    if (x.rows() != y.size() || x.rows() < 1) throw config_error("fit_rbf_gp: shape mismatch");
    const double mean_y = y.mean();
    const double sd = std::max(
        std::sqrt((y.array() - mean_y).square().sum() / std::max<double>(1, y.size() - 1)),
        1e-8);
    const PairDistances dist = pair_distances(x);

    auto objective = [&](const Eigen::VectorXd& p) {
        try {
            return -rbf_lml(x, y, RbfParams{std::exp(p[0]), std::exp(p[1])}, std::exp(p[2]));
        } catch (const numerical_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    Eigen::VectorXd lo(3), hi(3);
    lo << std::log(dist.min * 1e-2), std::log(sd * 1e-3), std::log(sd * 1e-4);
    hi << std::log(dist.median * 1e2), std::log(sd * 1e3), std::log(sd * 2.0);
    // length-scale starts span the resolvable range, from below the nearest
    // pair up to the median separation
    const double lstart[4] = {0.5 * dist.min, 0.25 * dist.median, dist.median,
                              2.0 * dist.min};
    const double nmul[4] = {0.3, 0.05, 0.7, 0.1};
    std::vector<Eigen::VectorXd> starts;
    for (int s = 0; s < std::max(4, multistarts); ++s) {
        Eigen::VectorXd p(3);
        p << std::log(lstart[s % 4]), std::log(sd), std::log(sd * nmul[s % 4]);
        starts.push_back(p.cwiseMax(lo).cwiseMin(hi));
    }
    const OptimResult opt = minimize_multistart(objective, starts, lo, hi);
    RbfFit fit;
    fit.params = RbfParams{std::exp(opt.x[0]), std::exp(opt.x[1])};
    fit.sigma_noise = std::exp(opt.x[2]);
    fit.lml = -opt.f;
    return fit;
}

Predictive predict_rbf_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RbfFit& fit,
                          const Eigen::MatrixXd& x_star, bool with_variance) {
    Eigen::MatrixXd cov = rbf_gram(x, fit.params);
    cov.diagonal().array() += fit.sigma_noise * fit.sigma_noise;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw numerical_error("rbf predict Cholesky failed");
    const Eigen::MatrixXd cross = rbf_cross(x, x_star, fit.params);
    Predictive out;
    out.mean = cross.transpose() * llt.solve(y);
    if (with_variance) {
        const Eigen::MatrixXd solved = llt.solve(cross);
        out.variance.resize(x_star.rows());
        const double self = fit.params.sigma_r * fit.params.sigma_r;
        for (Eigen::Index j = 0; j < x_star.rows(); ++j) {
            double v = self - cross.col(j).dot(solved.col(j));
            if (v < 0.0) {
                v = 0.0;
                ++out.variance_clips;
            }
            out.variance[j] = v;
        }
    }
    return out;
}

// ---- benchmark truths -----------------------------------------------------------

namespace {

// U-shape centerline: lower arm (y = -1) from the tip x = 3.5 to x = 0.5,
// half circle of radius 1 around (0.5, 0), upper arm (y = +1) back out to
// x = 3.5. Total length 6 + pi.
struct UshapeCoord {
    double s;  // arc length along the centerline, 0 at the lower-right tip
    double d;  // distance from the centerline
};

UshapeCoord ushape_coord(double x, double y) {
    if (x >= 0.5) {
        if (y < 0) return {3.5 - x, std::abs(y + 1.0)};
        return {3.0 + kPi + (x - 0.5), std::abs(y - 1.0)};
    }
    const double rx = x - 0.5;
    const double rho = std::hypot(rx, y);
    const double theta = std::atan2(y, rx);
    double a = std::fmod(-kPi / 2.0 - theta + 4.0 * kPi, 2.0 * kPi);
    return {3.0 + a, std::abs(rho - 1.0)};
}

}  // namespace

double ushape_truth(double x, double y) {
    const auto c = ushape_coord(x, y);
    return -6.0 + 12.0 * c.s / (6.0 + kPi);
}

double swissroll_arclength(double r) {
    // int_0^r sqrt(1 + u^2) du
    return 0.5 * (r * std::sqrt(1.0 + r * r) + std::asinh(r));
}

double swissroll_truth(double r, double z) {
    return 3.0 * std::sin(swissroll_arclength(r) / 6.0) + 0.4 * (z - 5.0);
}

double benchmark_truth(const BenchmarkSpec& spec, const ChartPoint& x) {
    if (spec.name == "ushape") {
        static const auto dom = make_ushape();
        if (!dom->inside(x)) throw data_error("benchmark point outside the U-shape domain");
        return ushape_truth(x[0], x[1]);
    }
    if (spec.name == "swissroll") {
        static const auto dom = make_swissroll();
        if (!dom->inside(x)) throw data_error("benchmark point outside the swiss roll");
        return swissroll_truth(x[0], x[1]);
    }
    throw config_error("unknown benchmark '" + spec.name + "'");
}

}  // namespace heatgp
