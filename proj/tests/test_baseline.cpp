#include <doctest.h>

#include <cmath>

#include "heatgp/baseline.hpp"
#include "heatgp/errors.hpp"
#include "heatgp/rng.hpp"

using namespace heatgp;

namespace {

constexpr double kPi = 3.14159265358979323846;

ChartPoint pt(double a, double b) {
    ChartPoint p(2);
    p << a, b;
    return p;
}

}  // namespace

TEST_CASE("rbf kernel values") {
    Eigen::VectorXd a(2), b(2);
    a << 1.0, 2.0;
    b << 1.0, 2.0;
    const RbfParams p{1.0, 1.5};
    CHECK(rbf_kernel(a, b, p) == doctest::Approx(2.25));
    b << 2.0, 2.0;  // distance 1
    CHECK(rbf_kernel(a, b, RbfParams{1.0, 1.0}) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("heat kernel is a scaled rbf kernel on flat space") {
    const double t = 1.7;
    const RbfParams p{std::sqrt(t), 1.0};
    Eigen::VectorXd x0(1), x1(1);
    x0 << 0.0;
    double ref = 0.0;
    for (double d : {0.3, 1.0, 2.2, 4.0}) {
        x1 << d;
        const double ratio = closed_form_kernel(1, x0, x1, t) / rbf_kernel(x0, x1, p);
        if (ref == 0.0) ref = ratio;
        CHECK(ratio == doctest::Approx(ref).epsilon(1e-12));
    }
    CHECK(ref == doctest::Approx(std::pow(2.0 * kPi * t, -0.5)));
}

TEST_CASE("rbf gram matrices on distinct points are positive definite") {
    const NormalStream stream(888, make_stream_id(StreamRole::Aux, 30));
    Eigen::MatrixXd x(50, 2);
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 2; ++j)
            stream.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 1,
                           &x(i, j));
    const Eigen::MatrixXd g = rbf_gram(3.0 * x, RbfParams{0.8, 1.2});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("rbf fit roughly recovers the generating length-scale") {
    Eigen::MatrixXd x(20, 1);
    for (int i = 0; i < 20; ++i) x(i, 0) = 10.0 * i / 19.0;
    Eigen::MatrixXd gram = rbf_gram(x, RbfParams{1.0, 1.0});
    gram.diagonal().array() += 1e-10;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const NormalStream stream(4321, make_stream_id(StreamRole::Aux, 31));
    Eigen::VectorXd z(20);
    for (int i = 0; i < 20; ++i)
        stream.normals(0, static_cast<std::uint32_t>(i), 0, 1, &z[i]);
    const Eigen::VectorXd y = llt.matrixL() * z;
    const RbfFit fit = fit_rbf_gp(x, y);
    CHECK(fit.params.l > 0.4);
    CHECK(fit.params.l < 2.5);
    CHECK(fit.params.sigma_r > 0.3);
    CHECK(fit.params.sigma_r < 3.0);
}

TEST_CASE("single-point predictive mean is a kernel bump") {
    Eigen::MatrixXd x(1, 1);
    x << 0.0;
    Eigen::VectorXd y(1);
    y << 2.0;
    RbfFit fit;
    fit.params = RbfParams{1.0, 1.0};
    fit.sigma_noise = 0.5;
    Eigen::MatrixXd xs(3, 1);
    xs << 0.0, 1.0, 2.0;
    const Predictive p = predict_rbf_gp(x, y, fit, xs);
    for (int j = 0; j < 3; ++j) {
        const double k = rbf_kernel(x.row(0).transpose(), xs.row(j).transpose(), fit.params);
        CHECK(p.mean[j] == doctest::Approx(k * 2.0 / (1.0 + 0.25)));
    }
}

TEST_CASE("u-shape truth hits the pinned endpoints") {
    CHECK(ushape_truth(3.5, -1.0) == doctest::Approx(-6.0));
    CHECK(ushape_truth(3.5, 1.0) == doctest::Approx(6.0));
    // midpoint of the half-annulus centerline: (0.5 - 1, 0) = (-0.5, 0)
    CHECK(ushape_truth(-0.5, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    // antisymmetric across the arms
    CHECK(ushape_truth(2.0, -1.0) == doctest::Approx(-ushape_truth(2.0, 1.0)));
}

TEST_CASE("u-shape truth is continuous along the centerline") {
    // walk the centerline: lower arm, cap, upper arm
    const double total = 6.0 + kPi;
    const int steps = 400;
    double prev = ushape_truth(3.5, -1.0);
    for (int i = 1; i <= steps; ++i) {
        const double s = total * i / steps;
        double x, y;
        if (s <= 3.0) {
            x = 3.5 - s;
            y = -1.0;
        } else if (s <= 3.0 + kPi) {
            const double a = s - 3.0;
            x = 0.5 + std::cos(-kPi / 2.0 - a);
            y = std::sin(-kPi / 2.0 - a);
        } else {
            x = 0.5 + (s - 3.0 - kPi);
            y = 1.0;
        }
        const double cur = ushape_truth(x, y);
        CHECK(std::abs(cur - prev) < 12.0 / total * (total / steps) * 1.5 + 1e-9);
        prev = cur;
    }
    CHECK(prev == doctest::Approx(6.0));
}

TEST_CASE("benchmark truth validates membership") {
    BenchmarkSpec spec;
    spec.name = "ushape";
    CHECK(benchmark_truth(spec, pt(2.0, -1.0)) == doctest::Approx(ushape_truth(2.0, -1.0)));
    CHECK_THROWS_AS(benchmark_truth(spec, pt(2.0, 0.0)), data_error);
    spec.name = "nonesuch";
    CHECK_THROWS_AS(benchmark_truth(spec, pt(0, 0)), config_error);
}

TEST_CASE("swiss roll truth is the pinned formula") {
    const double r = 7.0, z = 3.0;
    const double s = 0.5 * (r * std::sqrt(1 + r * r) + std::asinh(r));
    CHECK(swissroll_truth(r, z) == doctest::Approx(3.0 * std::sin(s / 6.0) + 0.4 * (z - 5.0)));
    CHECK(swissroll_arclength(0.0) == 0.0);
    // arc length grows like r^2/2 for large r
    CHECK(swissroll_arclength(10.0) == doctest::Approx(0.5 * 10.0 * std::sqrt(101.0) +
                                                       0.5 * std::asinh(10.0)));
}
