#include "heatgp/gp.hpp"

#include <cmath>
#include <sstream>

#include "heatgp/errors.hpp"
#include "heatgp/optim.hpp"

namespace heatgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::LLT<Eigen::MatrixXd> chol_or_throw(const Eigen::MatrixXd& cov, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << what << ": Cholesky failed (n=" << cov.rows()
           << ", min diag=" << cov.diagonal().minCoeff()
           << ", max |entry|=" << cov.cwiseAbs().maxCoeff() << ")";
        throw numerical_error(os.str());
    }
    return llt;
}

double effective_sd(const Eigen::VectorXd& y) {
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / std::max<double>(1, y.size() - 1);
    return std::max(std::sqrt(var), 1e-8);
}

}  // namespace

int CovarianceGrid::t_index(double t) const {
    if (t_grid.empty()) throw config_error("empty covariance grid");
    const double dt = sim.dt;
    const auto k = static_cast<std::int64_t>(std::llround(t / dt)) - 1;
    if (k < 0 || k >= static_cast<std::int64_t>(t_grid.size()) ||
        std::abs(t_grid[static_cast<std::size_t>(k)] - t) > 0.5 * dt)
        throw config_error("diffusion time not on the grid");
    return static_cast<int>(k);
}

CovarianceGrid build_covariance_grid(const Domain& domain, const Eigen::MatrixXd& points,
                                     const EnsembleSource& source, const WindowPolicy& policy,
                                     Exec exec) {
    const auto n = points.rows();
    if (n < 1) throw config_error("need at least one training point");

    CovarianceGrid grid;
    for (Eigen::Index i = 0; i < n; ++i) {
        PathEnsemble e = source(i);
        if (i == 0) {
            grid.sim = e.config;
            grid.t_grid.resize(e.config.n_steps);
            for (int k = 0; k < e.config.n_steps; ++k) grid.t_grid[k] = (k + 1) * e.config.dt;
            grid.sigma_raw.assign(grid.t_grid.size(), Eigen::MatrixXd::Zero(n, n));
            grid.stderr_.assign(grid.t_grid.size(), Eigen::MatrixXd::Zero(n, n));
        } else if (!(e.config == grid.sim)) {
            throw config_error("ensembles disagree on SimConfig (point " + std::to_string(i) +
                               ")");
        }
        if ((e.start - points.row(i).transpose()).norm() > 1e-12)
            throw config_error("ensemble start does not match training point " +
                               std::to_string(i));
        const DensityBlock block = density_block(domain, e, points, policy, exec);
        for (std::size_t k = 0; k < grid.t_grid.size(); ++k) {
            grid.sigma_raw[k].row(i) = block.value.row(static_cast<int>(k));
            grid.stderr_[k].row(i) = block.stderr_.row(static_cast<int>(k));
        }
    }
    grid.sigma.resize(grid.t_grid.size());
    grid.spectral_floor.assign(grid.t_grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.t_grid.size(); ++k) {
        const Eigen::MatrixXd sym =
            0.5 * (grid.sigma_raw[k] + grid.sigma_raw[k].transpose());
        grid.sigma[k] = noise_floor_repair(sym, 0.0, &grid.spectral_floor[k]);
    }
    return grid;
}

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw numerical_error("psd_repair: matrix not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw numerical_error("psd_repair: input not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw numerical_error("psd_repair: eigensolver failed");
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out =
        es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    out = 0.5 * (out + out.transpose().eval());
    const double jitter = 1e-8 * clipped.sum() / static_cast<double>(m.rows());
    out.diagonal().array() += jitter;
    return out;
}

Eigen::MatrixXd noise_floor_repair(const Eigen::MatrixXd& m, double noise_scale,
                                   double* floor_out) {
    if (m.rows() != m.cols()) throw numerical_error("psd_repair: matrix not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw numerical_error("psd_repair: input not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw numerical_error("psd_repair: eigensolver failed");
    // the magnitude of the most negative eigenvalue measures the noise edge
    // of the estimated spectrum; a fully resolved matrix gets no floor
    const double empirical = std::max(0.0, -es.eigenvalues().minCoeff());
    const double floor = std::max(noise_scale, empirical);
    if (floor_out) *floor_out = floor;
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd out =
        es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    out = 0.5 * (out + out.transpose().eval());
    const double jitter = 1e-8 * clipped.sum() / static_cast<double>(m.rows());
    out.diagonal().array() += jitter;
    return out;
}

double covariance_noise_scale(const Eigen::MatrixXd& stderr_entries) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (Eigen::Index i = 0; i < stderr_entries.rows(); ++i)
        for (Eigen::Index j = 0; j < stderr_entries.cols(); ++j)
            if (stderr_entries(i, j) > 0.0) {
                sum += stderr_entries(i, j);
                ++count;
            }
    if (count == 0) return 0.0;
    return 3.0 * (sum / count) * std::sqrt(static_cast<double>(stderr_entries.rows()));
}

double log_marginal_likelihood(const Eigen::MatrixXd& sigma_t, const Hyperparams& hp,
                               const Eigen::VectorXd& y) {
    const auto n = sigma_t.rows();
    if (sigma_t.cols() != n || y.size() != n)
        throw config_error("log_marginal_likelihood: dimension mismatch");
    if (hp.sigma_h <= 0.0 || hp.sigma_noise < 0.0)
        throw config_error("hyperparameters out of range");
    Eigen::MatrixXd cov = (hp.sigma_h * hp.sigma_h) * sigma_t;
    cov.diagonal().array() += hp.sigma_noise * hp.sigma_noise;
    const auto llt = chol_or_throw(cov, "log_marginal_likelihood");
    const Eigen::VectorXd alpha = llt.solve(y);
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

namespace {

// Spectral form of the marginal likelihood over the resolved directions of an
// estimated covariance. Eigenvalues at or below the noise floor carry no
// kernel variance; their response components are attributed to observation
// noise. For an exact (floor 0, PD) matrix this is the ordinary Gaussian
// log marginal likelihood.
struct SpectralData {
    Eigen::VectorXd lambda;   // eigenvalues, kept ones only
    Eigen::VectorXd y_kept;   // response coordinates on kept directions
    double y2_cut = 0.0;      // squared response mass on cut directions
    Eigen::Index n = 0;
};

SpectralData spectral_data(const Eigen::MatrixXd& sym, const Eigen::VectorXd& y) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const double floor = std::max(0.0, -es.eigenvalues().minCoeff());
    const double cut = floor * (1.0 + 1e-9);
    SpectralData out;
    out.n = sym.rows();
    std::vector<double> lam, yk;
    const Eigen::VectorXd yv = es.eigenvectors().transpose() * y;
    for (Eigen::Index i = 0; i < out.n; ++i) {
        if (es.eigenvalues()[i] > cut) {
            lam.push_back(es.eigenvalues()[i]);
            yk.push_back(yv[i]);
        } else {
            out.y2_cut += yv[i] * yv[i];
        }
    }
    out.lambda = Eigen::Map<Eigen::VectorXd>(lam.data(), lam.size());
    out.y_kept = Eigen::Map<Eigen::VectorXd>(yk.data(), yk.size());
    return out;
}

double spectral_lml(const SpectralData& s, double sigma_h, double sigma_noise) {
    const double sh2 = sigma_h * sigma_h;
    const double sn2 = sigma_noise * sigma_noise;
    if (!(sn2 > 0.0) && (s.y2_cut > 0.0 || s.lambda.size() < s.n))
        return -std::numeric_limits<double>::infinity();
    double lml = -0.5 * static_cast<double>(s.n) * kLog2Pi;
    for (Eigen::Index i = 0; i < s.lambda.size(); ++i) {
        const double v = sh2 * s.lambda[i] + sn2;
        lml += -0.5 * (s.y_kept[i] * s.y_kept[i] / v + std::log(v));
    }
    const auto n_cut = s.n - s.lambda.size();
    if (n_cut > 0)
        lml += -0.5 * (s.y2_cut / sn2 + static_cast<double>(n_cut) * std::log(sn2));
    return lml;
}

}  // namespace

FitResult fit(const CovarianceGrid& grid, const Eigen::VectorXd& y, const FitOptions& opts) {
    if (grid.sigma.empty()) throw config_error("fit: empty covariance grid");
    if (y.size() != grid.sigma.front().rows()) throw config_error("fit: response length");
    const double sd = effective_sd(y);
    const auto n_t = grid.t_grid.size();

    FitResult res;
    res.table.assign(n_t, PerTimeFit{});

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n_t); ++k) {
        const Eigen::MatrixXd& sigma = grid.sigma[static_cast<std::size_t>(k)];
        PerTimeFit& row = res.table[static_cast<std::size_t>(k)];
        row.t = grid.t_grid[static_cast<std::size_t>(k)];
        row.lml = -std::numeric_limits<double>::infinity();
        const double mean_diag = sigma.diagonal().mean();
        if (!(mean_diag > 0.0)) continue;

        // raw symmetrized estimate when available (Monte-Carlo grids), the
        // supplied matrix otherwise (exact grids)
        const SpectralData spec =
            k < static_cast<std::int64_t>(grid.sigma_raw.size()) &&
                    grid.sigma_raw[static_cast<std::size_t>(k)].rows() == y.size()
                ? spectral_data(0.5 * (grid.sigma_raw[static_cast<std::size_t>(k)] +
                                       grid.sigma_raw[static_cast<std::size_t>(k)].transpose()),
                                y)
                : spectral_data(sigma, y);

        const double sh0 = std::sqrt(sd * sd / mean_diag);
        const double sn_floor = opts.sigma_noise_floor_rel * sd;
        auto objective = [&](const Eigen::VectorXd& p) {
            const double v = spectral_lml(spec, std::exp(p[0]), std::exp(p[1]));
            return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
        };
        Eigen::VectorXd lo(2), hi(2);
        lo << std::log(sh0) - std::log(1e3), std::log(sn_floor);
        hi << std::log(sh0) + std::log(1e3), std::log(2.0 * sd);
        std::vector<Eigen::VectorXd> starts;
        const double mults[3] = {1.0, 3.0, 1.0 / 3.0};
        const double noise0[3] = {0.3, 0.05, 0.7};
        for (int s = 0; s < std::max(1, opts.multistarts); ++s) {
            Eigen::VectorXd p(2);
            p << std::log(sh0 * mults[s % 3]), std::log(std::max(noise0[s % 3] * sd, sn_floor));
            starts.push_back(p.cwiseMax(lo).cwiseMin(hi));
        }
        try {
            const OptimResult opt = minimize_multistart(objective, starts, lo, hi);
            row.sigma_h = std::exp(opt.x[0]);
            row.sigma_noise = std::exp(opt.x[1]);
            row.lml = -opt.f;
            row.converged = opt.converged;
        } catch (const numerical_error&) {
            // left as -inf; reported in the table
        }
    }

    std::int64_t best = -1;
    for (std::size_t k = 0; k < n_t; ++k) {
        if (!std::isfinite(res.table[k].lml)) continue;
        if (best < 0 || res.table[k].lml > res.table[static_cast<std::size_t>(best)].lml)
            best = static_cast<std::int64_t>(k);  // strict >: ties stay at smaller t
    }
    if (best < 0) {
        std::ostringstream os;
        os << "fit failed at every diffusion time (" << n_t << " grid values)";
        throw numerical_error(os.str());
    }
    const auto& b = res.table[static_cast<std::size_t>(best)];
    res.hp = Hyperparams{b.t, b.sigma_h, b.sigma_noise};

    int maxima = 0;
    for (std::size_t k = 0; k < n_t; ++k) {
        const double cur = res.table[k].lml;
        if (!std::isfinite(cur)) continue;
        const double prev = k > 0 ? res.table[k - 1].lml : -std::numeric_limits<double>::infinity();
        const double next =
            k + 1 < n_t ? res.table[k + 1].lml : -std::numeric_limits<double>::infinity();
        if (cur > prev && cur > next) ++maxima;
    }
    res.unimodal = maxima <= 1;
    return res;
}

Predictive predict(const CovarianceGrid& grid, const Hyperparams& hp, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& cross_cov,
                   const std::optional<Eigen::VectorXd>& test_self_diag,
                   const std::optional<Eigen::MatrixXd>& test_self_cov) {
    const auto k = static_cast<std::size_t>(grid.t_index(hp.t));
    const double floor = k < grid.spectral_floor.size() ? grid.spectral_floor[k] : 0.0;
    return predict_at(grid.sigma[k], hp, y, cross_cov, test_self_diag, test_self_cov, floor);
}

Predictive predict_at(const Eigen::MatrixXd& sigma, const Hyperparams& hp,
                      const Eigen::VectorXd& y, const Eigen::MatrixXd& cross_cov,
                      const std::optional<Eigen::VectorXd>& test_self_diag,
                      const std::optional<Eigen::MatrixXd>& test_self_cov,
                      double weight_floor) {
    const auto n = sigma.rows();
    if (cross_cov.rows() != n || y.size() != n)
        throw config_error("predict: dimension mismatch");
    const double sh2 = hp.sigma_h * hp.sigma_h;

    Eigen::MatrixXd cov = sh2 * sigma;
    cov.diagonal().array() += hp.sigma_noise * hp.sigma_noise;
    const auto llt = chol_or_throw(cov, "predict");
    Eigen::VectorXd alpha = llt.solve(y);

    // drop weight components living in the noise-floor eigenspace
    Eigen::MatrixXd keep;  // n x r basis of resolved directions
    if (weight_floor > 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
        // 1.5x: the |min eigenvalue| marks the noise edge from below; the
        // junk cluster extends slightly above it
        const double cut = weight_floor * 1.5 +
                           1e-8 * sigma.trace() / static_cast<double>(n) * 2.0;
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (es.eigenvalues()[i] > cut) ++r;
        keep.resize(n, r);
        Eigen::Index c = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (es.eigenvalues()[i] > cut) keep.col(c++) = es.eigenvectors().col(i);
        alpha = keep * (keep.transpose() * alpha);
    }

    Predictive out;
    out.mean = sh2 * (cross_cov.transpose() * alpha);

    if (!test_self_diag && !test_self_cov) return out;

    Eigen::MatrixXd filtered_cross = cross_cov;
    if (keep.size() > 0) filtered_cross = keep * (keep.transpose() * cross_cov);
    const Eigen::MatrixXd solved = llt.solve(sh2 * filtered_cross);
    const Eigen::VectorXd quad =
        (sh2 * filtered_cross).cwiseProduct(solved).colwise().sum().transpose();
    Eigen::VectorXd self;
    if (test_self_cov) {
        if (test_self_cov->rows() != cross_cov.cols())
            throw config_error("predict: test self-covariance shape");
        self = test_self_cov->diagonal();
        out.full_cov = sh2 * (*test_self_cov) - (sh2 * cross_cov).transpose() * solved;
    } else {
        if (test_self_diag->size() != cross_cov.cols())
            throw config_error("predict: test self-density length");
        self = *test_self_diag;
    }
    out.variance.resize(cross_cov.cols());
    for (Eigen::Index j = 0; j < cross_cov.cols(); ++j) {
        double v = sh2 * self[j] - quad[j];
        if (v < 0.0) {
            v = 0.0;
            ++out.variance_clips;
        }
        out.variance[j] = v;
    }
    return out;
}

}  // namespace heatgp
