#include <doctest.h>

#include <cmath>

#include "heatgp/errors.hpp"
#include "heatgp/geometry.hpp"
#include "heatgp/rng.hpp"

using namespace heatgp;

namespace {

constexpr double kPi = 3.14159265358979323846;

ChartPoint pt(double a, double b) {
    ChartPoint p(2);
    p << a, b;
    return p;
}

// Independent even-odd ray cast along a chosen direction, used to cross-check
// the production point-in-polygon code.
bool raycast_dir(const PolygonBoundary& poly, double px, double py, int dir) {
    int crossings = 0;
    for (const auto& ring : poly.rings()) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Vector2d a = ring[i], b = ring[(i + 1) % n];
            // rotate so the ray is +x
            auto rot = [&](Eigen::Vector2d v) {
                const double x = v.x() - px, y = v.y() - py;
                switch (dir) {
                    case 0: return Eigen::Vector2d(x, y);    // +x
                    case 1: return Eigen::Vector2d(-x, y);   // -x
                    case 2: return Eigen::Vector2d(y, x);    // +y
                    default: return Eigen::Vector2d(-y, x);  // -y
                }
            };
            const Eigen::Vector2d u = rot(a), v = rot(b);
            if ((u.y() > 0) != (v.y() > 0)) {
                const double xi = u.x() + (0.0 - u.y()) * (v.x() - u.x()) / (v.y() - u.y());
                if (xi > 0) ++crossings;
            }
        }
    }
    return crossings % 2 == 1;
}

// random interior points via rejection from the bounding box
std::vector<ChartPoint> random_interior(const Domain& dom, const Box& box, int count,
                                        std::uint64_t seed) {
    std::vector<ChartPoint> pts;
    std::uint64_t state = seed;
    auto next_u = [&state] {
        state = splitmix64(state);
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    while (static_cast<int>(pts.size()) < count) {
        ChartPoint p(box.dim());
        for (int k = 0; k < box.dim(); ++k)
            p[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * next_u();
        if (dom.inside(p)) pts.push_back(p);
    }
    return pts;
}

}  // namespace

TEST_CASE("metric of flat domains is the identity") {
    const auto dom = make_euclidean(2);
    const MetricTensor m = metric_at(*dom, pt(0.3, -4.0));
    CHECK((m.g - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK(m.det_g == doctest::Approx(1.0));
    for (const auto& j : metric_jacobian_at(*dom, pt(1.0, 2.0))) CHECK(j.norm() == 0.0);
}

TEST_CASE("swiss roll metric and jacobian") {
    const auto dom = make_swissroll();
    const MetricTensor m = metric_at(*dom, pt(2.0, 0.0));
    CHECK(m.g(0, 0) == doctest::Approx(5.0));
    CHECK(m.g(1, 1) == doctest::Approx(1.0));
    CHECK(m.g(0, 1) == 0.0);

    const auto jac = metric_jacobian_at(*dom, pt(2.0, 0.0));
    CHECK(jac[0](0, 0) == doctest::Approx(4.0));
    CHECK(jac[0](1, 1) == 0.0);
    CHECK(jac[1].norm() == 0.0);
}

TEST_CASE("embedding-induced metric matches the analytic swiss roll metric") {
    const auto dom = make_swissroll();
    const ChartPoint x = pt(1.5, 0.3);
    const Eigen::MatrixXd g_fd =
        metric_from_embedding([&](const ChartPoint& p) { return dom->embed(p); }, x);
    Eigen::MatrixXd g_true = Eigen::MatrixXd::Identity(2, 2);
    g_true(0, 0) = 1.0 + 1.5 * 1.5;
    CHECK((g_fd - g_true).cwiseAbs().maxCoeff() < 1e-6);
}

namespace {

// user-style domain: cylinder of radius 2 given only through its embedding
class CylinderDomain final : public Domain {
public:
    int dim() const override { return 2; }
    const std::string& name() const override { return name_; }
    bool inside(const ChartPoint& x) const override { return x.allFinite(); }
    bool has_embedding() const override { return true; }
    int ambient_dim() const override { return 3; }
    AmbientPoint embed(const ChartPoint& x) const override {
        AmbientPoint p(3);
        p << 2.0 * std::cos(x[0]), 2.0 * std::sin(x[0]), x[1];
        return p;
    }
    Eigen::MatrixXd metric(const ChartPoint& x) const override {
        return metric_from_embedding([this](const ChartPoint& p) { return embed(p); }, x);
    }

private:
    std::string name_ = "cylinder";
};

}  // namespace

TEST_CASE("finite-difference jacobian of a constant-curvature embedding is zero") {
    const CylinderDomain dom;
    const auto jac = metric_jacobian_at(dom, pt(0.7, -0.2));
    for (const auto& j : jac) CHECK(j.cwiseAbs().maxCoeff() < 1e-4);
    const MetricTensor m = metric_at(dom, pt(0.7, -0.2));
    CHECK(m.g(0, 0) == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(m.g(1, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("u-shape membership") {
    const auto dom = make_ushape();
    CHECK(dom->inside(pt(2.0, -1.0)));   // center of the lower arm
    CHECK(!dom->inside(pt(2.0, 0.0)));   // gap between the arms
    CHECK(!dom->inside(pt(2.0, 0.5)));   // exactly on the inner edge
    CHECK(!dom->inside(pt(4.0, -1.0)));  // beyond the tip
    CHECK(dom->inside(pt(-0.6, 0.0)));   // inside the cap
    CHECK(!dom->inside(pt(0.4, 0.0)));   // inside the inner hole

    const auto dome = make_euclidean(3);
    ChartPoint far(3);
    far << 1e9, -1e9, 42.0;
    CHECK(dome->inside(far));
}

TEST_CASE("u-shape vertices are pinned") {
    const auto v = ushape_vertices();
    CHECK(v.front().x() == 3.5);
    CHECK(v.front().y() == -1.5);
    // leftmost point of the outer cap: (0.5 - 1.5, 0) = (-1, 0)
    double min_x = 1e9;
    for (const auto& p : v) min_x = std::min(min_x, p.x());
    CHECK(min_x == doctest::Approx(-1.0).epsilon(1e-12));
    const Box box = make_ushape()->boundary().bounding_box();
    CHECK(box.lo[0] == doctest::Approx(-1.0));
    CHECK(box.hi[0] == 3.5);
    CHECK(box.lo[1] == -1.5);
    CHECK(box.hi[1] == 1.5);
}

TEST_CASE("metric properties at random interior points") {
    const std::vector<DomainPtr> domains = {make_euclidean(2), make_ushape(),
                                            make_swissroll()};
    for (const auto& dom : domains) {
        const Box box = dom->bounding_box() ? *dom->bounding_box()
                                            : Box{pt(-5.0, -5.0), pt(5.0, 5.0)};
        int checked = 0;
        for (const auto& x : random_interior(*dom, box, 1000, 0xBEEF)) {
            const MetricTensor m = metric_at(*dom, x);
            CHECK((m.g - m.g.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK((m.inv_g * m.g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <
                  1e-10);
            CHECK((m.sqrt_inv_g * m.sqrt_inv_g - m.inv_g).cwiseAbs().maxCoeff() < 1e-8);
            ++checked;
        }
        CHECK(checked == 1000);
    }
}

TEST_CASE("analytic metric jacobian matches central differences") {
    const auto dom = make_swissroll();
    for (const auto& x : random_interior(*dom, *dom->bounding_box(), 50, 0xF00D)) {
        const auto analytic = dom->metric_jacobian(x);
        const auto fd = dom->Domain::metric_jacobian(x);  // base-class FD fallback
        for (int j = 0; j < 2; ++j) {
            const double scale = std::max(1.0, analytic[j].cwiseAbs().maxCoeff());
            CHECK((analytic[j] - fd[j]).cwiseAbs().maxCoeff() / scale < 1e-5);
        }
    }
}

TEST_CASE("inside agrees with ray casts in four directions") {
    const auto dom = make_ushape();
    const auto& poly = dom->boundary();
    const Box box = poly.bounding_box();
    std::uint64_t state = 77;
    auto next_u = [&state] {
        state = splitmix64(state);
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    for (int i = 0; i < 500; ++i) {
        const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * next_u();
        const double y = box.lo[1] + (box.hi[1] - box.lo[1]) * next_u();
        const bool in = dom->inside(pt(x, y));
        for (int dir = 0; dir < 4; ++dir) CHECK(in == raycast_dir(poly, x, y, dir));
    }
}

TEST_CASE("swiss roll embedding values") {
    const auto dom = make_swissroll();
    const AmbientPoint p = dom->embed(pt(kPi, 1.0));
    CHECK(p[0] == doctest::Approx(-kPi));
    CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p[2] == 1.0);

    const AmbientPoint q = dom->embed(pt(0.0, 0.0));
    CHECK(q.norm() == 0.0);

    const AmbientPoint r = dom->embed(pt(1.0, 2.0));
    CHECK(r[0] == doctest::Approx(std::cos(1.0)));
    CHECK(r[1] == doctest::Approx(std::sin(1.0)));
    CHECK(r[2] == 2.0);

    const auto flat = make_euclidean(2);
    CHECK_THROWS_AS(embed(*flat, pt(0, 0)), config_error);
}

TEST_CASE("degenerate metric is reported with the point") {
    class BadDomain final : public Domain {
    public:
        int dim() const override { return 2; }
        const std::string& name() const override { return name_; }
        bool inside(const ChartPoint&) const override { return true; }
        Eigen::MatrixXd metric(const ChartPoint&) const override {
            Eigen::MatrixXd g(2, 2);
            g << 1.0, 2.0, 2.0, 1.0;  // indefinite
            return g;
        }

    private:
        std::string name_ = "bad";
    } bad;
    CHECK_THROWS_AS(metric_at(bad, pt(1.0, 2.0)), numerical_error);
    try {
        metric_at(bad, pt(1.0, 2.0));
    } catch (const numerical_error& e) {
        CHECK(std::string(e.what()).find("(1, 2)") != std::string::npos);
    }
}

TEST_CASE("polygon rejects self-intersection and closes rings") {
    std::vector<Eigen::Vector2d> bowtie = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    CHECK_THROWS_AS(PolygonBoundary({bowtie}), config_error);

    std::vector<Eigen::Vector2d> closed = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
    const PolygonBoundary poly({closed});
    CHECK(poly.rings().front().size() == 4);  // stored open
    CHECK(poly.contains(0.5, 0.5));
    CHECK(!poly.contains(0.0, 0.5));  // on an edge
    CHECK(!poly.contains(0.5, 1.0));
    CHECK(!poly.contains(1.0, 1.0));  // vertex
}

TEST_CASE("polygon with a hole") {
    std::vector<Eigen::Vector2d> outer = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
    std::vector<Eigen::Vector2d> hole = {{1, 1}, {1, 3}, {3, 3}, {3, 1}};  // clockwise
    const PolygonBoundary poly({outer, hole});
    CHECK(poly.contains(0.5, 0.5));
    CHECK(!poly.contains(2.0, 2.0));
    CHECK(poly.contains(3.5, 2.0));
}

TEST_CASE("grid placement on the unit box") {
    const auto dom = make_euclidean(2);
    Box box;
    box.lo = pt(0.0, 0.0);
    box.hi = pt(1.0, 1.0);
    const auto pts = grid_points_inside(*dom, box, 4);
    REQUIRE(pts.size() == 4);
    CHECK(pts[0][0] == doctest::Approx(0.25));
    CHECK(pts[0][1] == doctest::Approx(0.25));
    CHECK(pts[3][0] == doctest::Approx(0.75));
    CHECK(pts[3][1] == doctest::Approx(0.75));
}
