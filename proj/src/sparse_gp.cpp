#include "heatgp/sparse_gp.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "heatgp/errors.hpp"
#include "heatgp/optim.hpp"

namespace heatgp {

namespace alloc_stats {
namespace {
std::atomic<std::size_t> g_max_min_dim{0};
std::atomic<std::size_t> g_max_elements{0};

void record(Eigen::Index rows, Eigen::Index cols) {
    const auto mn = static_cast<std::size_t>(std::min(rows, cols));
    const auto el = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    std::size_t cur = g_max_min_dim.load();
    while (mn > cur && !g_max_min_dim.compare_exchange_weak(cur, mn)) {
    }
    cur = g_max_elements.load();
    while (el > cur && !g_max_elements.compare_exchange_weak(cur, el)) {
    }
}
}  // namespace

void reset() {
    g_max_min_dim = 0;
    g_max_elements = 0;
}
std::size_t max_min_dim() { return g_max_min_dim.load(); }
std::size_t max_elements() { return g_max_elements.load(); }
}  // namespace alloc_stats

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::MatrixXd tracked(Eigen::Index rows, Eigen::Index cols) {
    alloc_stats::record(rows, cols);
    return Eigen::MatrixXd(rows, cols);
}

Eigen::VectorXd tracked_vec(Eigen::Index n) {
    alloc_stats::record(n, 1);
    return Eigen::VectorXd(n);
}

// Cholesky of sigma_uu with jitter added only on failure (keeps the
// inducing = training degeneracy exact at the linear-algebra level).
Eigen::LLT<Eigen::MatrixXd> chol_uu(const Eigen::MatrixXd& sigma_uu) {
    const auto m = sigma_uu.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_uu);
    if (llt.info() == Eigen::Success) return llt;
    const double base = 1e-6 * sigma_uu.trace() / static_cast<double>(m);
    double jitter = std::max(base, 1e-300);
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd j = sigma_uu;
        j.diagonal().array() += jitter;
        llt.compute(j);
        if (llt.info() == Eigen::Success) return llt;
        jitter *= 100.0;
    }
    std::ostringstream os;
    os << "sigma_uu singular after jitter (m=" << m << ", trace=" << sigma_uu.trace()
       << ", min diag=" << sigma_uu.diagonal().minCoeff() << ")";
    throw numerical_error(os.str());
}

}  // namespace

int SparseGrid::t_index(double t) const {
    const double dt = sim.dt;
    const auto k = static_cast<std::int64_t>(std::llround(t / dt)) - 1;
    if (k < 0 || k >= static_cast<std::int64_t>(t_grid.size()) ||
        std::abs(t_grid[static_cast<std::size_t>(k)] - t) > 0.5 * dt)
        throw config_error("diffusion time not on the sparse grid");
    return static_cast<int>(k);
}

std::vector<ChartPoint> place_inducing_grid(const Domain& domain, const Box& box,
                                            int m_target) {
    if (m_target < 1) throw config_error("inducing target must be >= 1");
    return grid_points_inside(domain, box, m_target);
}

Eigen::MatrixXd place_inducing_matrix(const Domain& domain, const Box& box, int m_target) {
    const auto pts = place_inducing_grid(domain, box, m_target);
    Eigen::MatrixXd z(pts.size(), domain.dim());
    for (std::size_t i = 0; i < pts.size(); ++i) z.row(i) = pts[i].transpose();
    return z;
}

double inducing_noise_scale(const Eigen::MatrixXd& stderr_uu) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (Eigen::Index i = 0; i < stderr_uu.rows(); ++i)
        for (Eigen::Index j = 0; j < stderr_uu.cols(); ++j)
            if (stderr_uu(i, j) > 0.0) {
                sum += stderr_uu(i, j);
                ++count;
            }
    if (count == 0) return 0.0;
    return 3.0 * (sum / count) * std::sqrt(static_cast<double>(stderr_uu.rows()));
}

Eigen::MatrixXd regularize_inducing_cov(const Eigen::MatrixXd& sym_uu, double noise_scale) {
    const auto m = sym_uu.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym_uu);
    if (es.info() != Eigen::Success)
        throw numerical_error("inducing covariance eigensolver failed");
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0))
        throw numerical_error("inducing covariance has no positive eigenvalue");
    Eigen::VectorXd lam = es.eigenvalues();
    const double floor = std::max(noise_scale, 1e-12 * lmax);
    for (Eigen::Index i = 0; i < m; ++i)
        if (!(lam[i] > floor)) lam[i] = lmax;
    Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose().eval());
}

SparseGrid build_sparse_grid(const Domain& domain, const Eigen::MatrixXd& inducing,
                             const Eigen::MatrixXd& train_points, const EnsembleSource& source,
                             const WindowPolicy& policy, Exec exec) {
    const auto m = inducing.rows();
    const auto n = train_points.rows();
    if (m < 1) throw config_error("need at least one inducing point");

    // single target block: inducing points first, then training points
    Eigen::MatrixXd targets(m + n, inducing.cols());
    targets.topRows(m) = inducing;
    targets.bottomRows(n) = train_points;

    SparseGrid grid;
    std::vector<Eigen::MatrixXd> uu_raw, uu_stderr;
    for (Eigen::Index i = 0; i < m; ++i) {
        PathEnsemble e = source(i);
        if (i == 0) {
            grid.sim = e.config;
            grid.t_grid.resize(e.config.n_steps);
            for (int k = 0; k < e.config.n_steps; ++k) grid.t_grid[k] = (k + 1) * e.config.dt;
            uu_raw.assign(grid.t_grid.size(), Eigen::MatrixXd::Zero(m, m));
            uu_stderr.assign(grid.t_grid.size(), Eigen::MatrixXd::Zero(m, m));
            grid.sigma_uf.assign(grid.t_grid.size(), Eigen::MatrixXd::Zero(m, n));
        } else if (!(e.config == grid.sim)) {
            throw config_error("inducing ensembles disagree on SimConfig");
        }
        if ((e.start - inducing.row(i).transpose()).norm() > 1e-12)
            throw config_error("ensemble start does not match inducing point " +
                               std::to_string(i));
        const DensityBlock block = density_block(domain, e, targets, policy, exec);
        for (std::size_t k = 0; k < grid.t_grid.size(); ++k) {
            uu_raw[k].row(i) = block.value.row(static_cast<int>(k)).head(m);
            uu_stderr[k].row(i) = block.stderr_.row(static_cast<int>(k)).head(m);
            grid.sigma_uf[k].row(i) = block.value.row(static_cast<int>(k)).tail(n);
        }
    }
    grid.sigma_uu.resize(grid.t_grid.size());
    for (std::size_t k = 0; k < grid.t_grid.size(); ++k)
        grid.sigma_uu[k] = regularize_inducing_cov(
            0.5 * (uu_raw[k] + uu_raw[k].transpose()), inducing_noise_scale(uu_stderr[k]));
    return grid;
}

Eigen::MatrixXd build_q(const Eigen::MatrixXd& sigma_uu, const Eigen::MatrixXd& sigma_au,
                        const Eigen::MatrixXd& sigma_ub) {
    const auto m = sigma_uu.rows();
    if (sigma_uu.cols() != m || sigma_au.cols() != m || sigma_ub.rows() != m)
        throw config_error("build_q: dimension mismatch");
    const auto llt = chol_uu(sigma_uu);
    Eigen::MatrixXd solved = tracked(m, sigma_ub.cols());
    solved.noalias() = llt.solve(sigma_ub);
    Eigen::MatrixXd q = tracked(sigma_au.rows(), sigma_ub.cols());
    q.noalias() = sigma_au * solved;
    return q;
}

namespace {

// Shared low-rank pieces: U = L^{-1} sigma_uf, A = U U^T, b = U y.
struct Woodbury {
    Eigen::MatrixXd u;       // m x n
    Eigen::MatrixXd a;       // m x m
    Eigen::VectorXd b;       // m
    double yty = 0.0;
    Eigen::Index n = 0;
    Eigen::LLT<Eigen::MatrixXd> llt_uu;
};

Woodbury make_woodbury(const Eigen::MatrixXd& sigma_uu, const Eigen::MatrixXd& sigma_uf,
                       const Eigen::VectorXd& y) {
    const auto m = sigma_uu.rows();
    const auto n = sigma_uf.cols();
    if (y.size() != n) throw config_error("sparse likelihood: response length mismatch");
    Woodbury w;
    w.llt_uu = chol_uu(sigma_uu);
    w.u = tracked(m, n);
    w.u.noalias() =
        w.llt_uu.matrixL().solve(sigma_uf);
    w.a = tracked(m, m);
    w.a.noalias() = w.u * w.u.transpose();
    w.b = tracked_vec(m);
    w.b.noalias() = w.u * y;
    w.yty = y.squaredNorm();
    w.n = n;
    return w;
}

Eigen::LLT<Eigen::MatrixXd> capacity_chol(const Woodbury& w, double sh2, double sn2) {
    Eigen::MatrixXd c = tracked(w.a.rows(), w.a.cols());
    c = sh2 * w.a;
    c.diagonal().array() += sn2;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
        throw numerical_error("sparse likelihood: capacity matrix factorization failed");
    return llt;
}

double sparse_lml_from(const Woodbury& w, double sigma_h, double sigma_noise) {
    if (sigma_noise <= 0.0)
        throw numerical_error(
            "sparse likelihood is singular at sigma_noise = 0 (rank-deficient Q)");
    const double sh2 = sigma_h * sigma_h;
    const double sn2 = sigma_noise * sigma_noise;
    const auto llt = capacity_chol(w, sh2, sn2);
    const Eigen::VectorXd cb = llt.solve(w.b);
    const double quad = (w.yty - sh2 * w.b.dot(cb)) / sn2;
    const double logdet_c = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double logdet =
        static_cast<double>(w.n - w.a.rows()) * std::log(sn2) + logdet_c;
    return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(w.n) * kLog2Pi;
}

}  // namespace

double sparse_log_marginal(const SparseModel& model, const Eigen::VectorXd& y) {
    const Woodbury w = make_woodbury(model.sigma_uu, model.sigma_uf, y);
    return sparse_lml_from(w, model.hp.sigma_h, model.hp.sigma_noise);
}

Predictive sparse_predict(const SparseModel& model, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& sigma_u_star) {
    if (sigma_u_star.rows() != model.sigma_uu.rows())
        throw config_error("sparse_predict: sigma_u_star must have m rows");
    if (model.hp.sigma_noise <= 0.0)
        throw numerical_error("sparse_predict needs sigma_noise > 0");
    const Woodbury w = make_woodbury(model.sigma_uu, model.sigma_uf, y);
    const double sh2 = model.hp.sigma_h * model.hp.sigma_h;
    const double sn2 = model.hp.sigma_noise * model.hp.sigma_noise;
    const auto llt_c = capacity_chol(w, sh2, sn2);

    const auto ms = sigma_u_star.cols();
    Eigen::MatrixXd u_star = tracked(model.sigma_uu.rows(), ms);
    u_star.noalias() = w.llt_uu.matrixL().solve(sigma_u_star);

    Predictive out;
    // mean = sh^2 U*^T C^{-1} (U y)
    const Eigen::VectorXd cb = llt_c.solve(w.b);
    out.mean = sh2 * (u_star.transpose() * cb);

    // var_j = sh^2 u*_j^T u*_j - sh^4 u*_j^T C^{-1} A u*_j
    Eigen::MatrixXd ca = tracked(w.a.rows(), ms);
    ca.noalias() = w.a * u_star;
    ca = llt_c.solve(ca);
    out.variance.resize(ms);
    for (Eigen::Index j = 0; j < ms; ++j) {
        double v = sh2 * u_star.col(j).squaredNorm() -
                   sh2 * sh2 * u_star.col(j).dot(ca.col(j));
        if (v < 0.0) {
            v = 0.0;
            ++out.variance_clips;
        }
        out.variance[j] = v;
    }
    return out;
}

FitResult sparse_fit(const SparseGrid& grid, const Eigen::VectorXd& y,
                     const FitOptions& opts) {
    if (grid.sigma_uu.empty()) throw config_error("sparse_fit: empty grid");
    const double mean_y = y.mean();
    const double sd = std::max(
        std::sqrt((y.array() - mean_y).square().sum() / std::max<double>(1, y.size() - 1)),
        1e-8);
    const auto n_t = grid.t_grid.size();

    FitResult res;
    res.table.assign(n_t, PerTimeFit{});

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n_t); ++k) {
        PerTimeFit& row = res.table[static_cast<std::size_t>(k)];
        row.t = grid.t_grid[static_cast<std::size_t>(k)];
        row.lml = -std::numeric_limits<double>::infinity();
        const Eigen::MatrixXd& uu = grid.sigma_uu[static_cast<std::size_t>(k)];
        const double mean_diag = uu.diagonal().mean();
        if (!(mean_diag > 0.0)) continue;
        Woodbury w;
        try {
            w = make_woodbury(uu, grid.sigma_uf[static_cast<std::size_t>(k)], y);
        } catch (const numerical_error&) {
            continue;
        }
        const double sh0 = std::sqrt(sd * sd / mean_diag);
        const double sn_floor = std::max(opts.sigma_noise_floor_rel * sd, 1e-12);
        auto objective = [&](const Eigen::VectorXd& p) {
            try {
                return -sparse_lml_from(w, std::exp(p[0]), std::exp(p[1]));
            } catch (const numerical_error&) {
                return std::numeric_limits<double>::infinity();
            }
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
        }
    }

    std::int64_t best = -1;
    for (std::size_t k = 0; k < n_t; ++k) {
        if (!std::isfinite(res.table[k].lml)) continue;
        if (best < 0 || res.table[k].lml > res.table[static_cast<std::size_t>(best)].lml)
            best = static_cast<std::int64_t>(k);
    }
    if (best < 0) throw numerical_error("sparse fit failed at every diffusion time");
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

SparseModel make_sparse_model(const SparseGrid& grid, const Eigen::MatrixXd& inducing,
                              const Hyperparams& hp) {
    const int k = grid.t_index(hp.t);
    SparseModel model;
    model.inducing_points = inducing;
    model.sigma_uu = grid.sigma_uu[static_cast<std::size_t>(k)];
    model.sigma_uf = grid.sigma_uf[static_cast<std::size_t>(k)];
    model.hp = hp;
    return model;
}

}  // namespace heatgp
