#include <doctest.h>

#include <cmath>

#include "heatgp/errors.hpp"
#include "heatgp/rng.hpp"
#include "heatgp/sparse_gp.hpp"

using namespace heatgp;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::MatrixXd heat_gram(const Eigen::MatrixXd& x, double t) {
    const auto n = x.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            g(i, j) = closed_form_kernel(static_cast<int>(x.cols()), x.row(i).transpose(),
                                         x.row(j).transpose(), t);
    return g;
}

Eigen::MatrixXd random_psd(int n, std::uint64_t seed) {
    const NormalStream stream(seed, make_stream_id(StreamRole::Aux, 77));
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            stream.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 1,
                           &a(i, j));
    Eigen::MatrixXd m = a * a.transpose();
    m.diagonal().array() += 1e-6;
    return m;
}

}  // namespace

TEST_CASE("inducing grid on the unit box") {
    const auto dom = make_euclidean(2);
    Box box;
    box.lo = Eigen::Vector2d(0.0, 0.0);
    box.hi = Eigen::Vector2d(1.0, 1.0);
    const Eigen::MatrixXd z = place_inducing_matrix(*dom, box, 4);
    REQUIRE(z.rows() == 4);
    CHECK(z(0, 0) == doctest::Approx(0.25));
    CHECK(z(3, 0) == doctest::Approx(0.75));
    CHECK(z(3, 1) == doctest::Approx(0.75));
}

TEST_CASE("inducing grid stays inside the u-shape") {
    const auto dom = make_ushape();
    const Box box = domain_box_or(*dom);
    const auto pts = place_inducing_grid(*dom, box, 10);
    CHECK(pts.size() >= 8);
    CHECK(pts.size() <= 12);
    for (const auto& p : pts) CHECK(dom->inside(p));
}

TEST_CASE("build_q degenerates to the dense covariance when u = f") {
    const Eigen::MatrixXd sigma = random_psd(6, 12);
    const Eigen::MatrixXd q = build_q(sigma, sigma, sigma);
    CHECK((q - sigma).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("build_q rank-one case") {
    Eigen::MatrixXd uu(1, 1);
    uu << 2.0;
    Eigen::MatrixXd au(3, 1), ub(1, 2);
    au << 1.0, 0.5, -2.0;
    ub << 0.25, 4.0;
    const Eigen::MatrixXd q = build_q(uu, au, ub);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(q(i, j) == doctest::Approx(au(i, 0) * ub(0, j) / 2.0));
}

TEST_CASE("q matrices are PSD with rank at most m") {
    const Eigen::MatrixXd uu = random_psd(3, 5);
    const NormalStream stream(6, make_stream_id(StreamRole::Aux, 78));
    Eigen::MatrixXd fu(8, 3);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 3; ++j)
            stream.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 1,
                           &fu(i, j));
    const Eigen::MatrixXd q = build_q(uu, fu, fu.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (q + q.transpose()));
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
    int rank = 0;
    for (int i = 0; i < 8; ++i)
        if (es.eigenvalues()[i] > 1e-9 * es.eigenvalues().maxCoeff()) ++rank;
    CHECK(rank <= 3);
}

TEST_CASE("sparse likelihood equals the dense one in the degenerate case") {
    Eigen::MatrixXd x(7, 1);
    for (int i = 0; i < 7; ++i) x(i, 0) = 0.9 * i;
    const Eigen::MatrixXd sigma = psd_repair(heat_gram(x, 1.2));
    Eigen::VectorXd y(7);
    y << 0.3, -1.0, 0.4, 0.8, -0.6, 0.1, 1.4;
    const Hyperparams hp{1.2, 1.4, 0.35};

    SparseModel model;
    model.inducing_points = x;
    model.sigma_uu = sigma;
    model.sigma_uf = sigma;
    model.hp = hp;
    const double sparse = sparse_log_marginal(model, y);
    const double dense = log_marginal_likelihood(sigma, hp, y);
    CHECK(sparse == doctest::Approx(dense).epsilon(1e-10));

    // predictions: test points = training points, sigma_u* = sigma
    const Predictive ps = sparse_predict(model, y, sigma);
    const CovarianceGrid grid{{hp.t}, {sigma}, {}, {}, {0.0}, SimConfig{1, 1, hp.t, 1000, 0}};
    const Predictive pd = predict(grid, hp, y, sigma, sigma.diagonal().eval());
    CHECK((ps.mean - pd.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ps.variance - pd.variance).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sparse likelihood matches a direct dense evaluation, n=2 m=1") {
    Eigen::MatrixXd uu(1, 1);
    uu << 2.0;
    Eigen::MatrixXd uf(1, 2);
    uf << 1.0, 0.5;
    Eigen::VectorXd y(2);
    y << 0.3, -0.2;
    const double sh = 1.3, sn = 0.5;

    SparseModel model;
    model.inducing_points = Eigen::MatrixXd::Zero(1, 1);
    model.sigma_uu = uu;
    model.sigma_uf = uf;
    model.hp = Hyperparams{1.0, sh, sn};
    const double got = sparse_log_marginal(model, y);

    // direct 2x2 Gaussian log-density with Q = uf' uu^{-1} uf
    Eigen::MatrixXd cov = sh * sh * (uf.transpose() * uf) / 2.0;
    cov.diagonal().array() += sn * sn;
    const double logdet = std::log(cov.determinant());
    const double quad = y.dot(cov.inverse() * y);
    const double expected = -0.5 * quad - 0.5 * logdet - kLog2Pi;
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sparse likelihood requires a noise floor") {
    SparseModel model;
    model.sigma_uu = random_psd(2, 3);
    model.sigma_uf = Eigen::MatrixXd::Random(2, 5);
    model.hp = Hyperparams{1.0, 1.0, 0.0};
    Eigen::VectorXd y = Eigen::VectorXd::Ones(5);
    CHECK_THROWS_AS(sparse_log_marginal(model, y), numerical_error);
}

TEST_CASE("sparse likelihood is invariant to inducing-point permutation") {
    const Eigen::MatrixXd uu = random_psd(4, 9);
    const NormalStream stream(10, make_stream_id(StreamRole::Aux, 79));
    Eigen::MatrixXd uf(4, 9);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 9; ++j)
            stream.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 1,
                           &uf(i, j));
    Eigen::VectorXd y(9);
    y << 1, -1, 0.5, 0.2, -0.7, 1.1, 0.0, 0.4, -0.3;

    SparseModel a;
    a.sigma_uu = uu;
    a.sigma_uf = uf;
    a.hp = Hyperparams{1.0, 0.9, 0.4};

    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 2, 0, 3, 1;
    SparseModel b = a;
    b.sigma_uu = perm * uu * perm.transpose();
    b.sigma_uf = perm * uf;
    CHECK(sparse_log_marginal(a, y) == doctest::Approx(sparse_log_marginal(b, y)).epsilon(1e-11));
}

TEST_CASE("sparse predictions track dense ones on a small u-shape problem") {
    const auto dom = make_ushape();
    const Box box = domain_box_or(*dom);
    const auto train_pts = grid_points_inside(*dom, box, 20);
    Eigen::MatrixXd x(train_pts.size(), 2);
    for (std::size_t i = 0; i < train_pts.size(); ++i) x.row(i) = train_pts[i].transpose();
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1);

    SimConfig cfg;
    cfg.n_paths = 30000;
    cfg.n_steps = 25;
    cfg.dt = 0.12;
    cfg.seed = 2718;
    WindowPolicy policy;

    std::vector<PathEnsemble> ens;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        ens.push_back(simulate_ensemble(
            *dom, x.row(i).transpose(), cfg,
            make_stream_id(StreamRole::Train, static_cast<std::uint64_t>(i))));
    const CovarianceGrid grid = build_covariance_grid(
        *dom, x, [&](std::int64_t i) { return ens[static_cast<std::size_t>(i)]; }, policy);
    const FitResult dense_fit = fit(grid, y);
    const int step = grid.t_index(dense_fit.hp.t) + 1;

    const auto test_pts = grid_points_inside(*dom, box, 60);
    Eigen::MatrixXd xs(test_pts.size(), 2);
    for (std::size_t i = 0; i < test_pts.size(); ++i) xs.row(i) = test_pts[i].transpose();
    Eigen::MatrixXd cross(x.rows(), xs.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        cross.row(i) = density_block_at_step(*dom, ens[static_cast<std::size_t>(i)], step, xs,
                                             policy)
                           .value.row(0);
    const Predictive dense_pred = predict(grid, dense_fit.hp, y, cross);

    // sparse with 10 inducing points simulated separately
    const Eigen::MatrixXd z = place_inducing_matrix(*dom, box, 10);
    const SparseGrid sgrid = build_sparse_grid(
        *dom, z, x,
        [&](std::int64_t i) {
            return simulate_ensemble(
                *dom, z.row(i).transpose(), cfg,
                make_stream_id(StreamRole::Inducing, static_cast<std::uint64_t>(i)));
        },
        policy);
    const FitResult sparse_res = sparse_fit(sgrid, y);
    SparseModel model = make_sparse_model(sgrid, z, sparse_res.hp);
    const int sstep = sgrid.t_index(sparse_res.hp.t) + 1;
    Eigen::MatrixXd ustar(z.rows(), xs.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const PathEnsemble e = simulate_ensemble(
            *dom, z.row(i).transpose(), cfg,
            make_stream_id(StreamRole::Inducing, static_cast<std::uint64_t>(i)));
        ustar.row(i) = density_block_at_step(*dom, e, sstep, xs, policy).value.row(0);
    }
    const Predictive sparse_pred = sparse_predict(model, y, ustar);

    const double range = y.maxCoeff() - y.minCoeff();
    const double rms_diff =
        std::sqrt((sparse_pred.mean - dense_pred.mean).squaredNorm() / xs.rows());
    CHECK(rms_diff <= 0.10 * range);
}

TEST_CASE("sparse operations never allocate n x n") {
    const int n = 2000, m = 25;
    const Eigen::MatrixXd uu = random_psd(m, 21);
    const NormalStream stream(30, make_stream_id(StreamRole::Aux, 80));
    Eigen::MatrixXd uf(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            stream.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 1,
                           &uf(i, j));
    Eigen::VectorXd y(n);
    for (int j = 0; j < n; ++j) y[j] = std::sin(0.01 * j);

    SparseModel model;
    model.sigma_uu = uu;
    model.sigma_uf = uf;
    model.hp = Hyperparams{1.0, 1.1, 0.3};

    alloc_stats::reset();
    (void)sparse_log_marginal(model, y);
    Eigen::MatrixXd ustar(m, 64);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < 64; ++j)
            stream.normals(static_cast<std::uint32_t>(i + m), static_cast<std::uint32_t>(j),
                           0, 1, &ustar(i, j));
    (void)sparse_predict(model, y, ustar);
    CHECK(alloc_stats::max_min_dim() <= static_cast<std::size_t>(m));
    CHECK(alloc_stats::max_elements() <= static_cast<std::size_t>(m) * n);
}
