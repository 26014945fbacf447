#include "heatgp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "heatgp/errors.hpp"
#include "heatgp/io.hpp"

namespace heatgp {

namespace {

std::string point_str(const ChartPoint& x) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

// ---- PolygonBoundary --------------------------------------------------------

namespace {

double ring_signed_area(const std::vector<Eigen::Vector2d>& ring) {
    double s2 = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % ring.size()];
        s2 += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * s2;
}

}  // namespace

PolygonBoundary::PolygonBoundary(std::vector<std::vector<Eigen::Vector2d>> rings)
    : rings_(std::move(rings)) {
    if (rings_.empty()) throw config_error("polygon boundary needs at least one ring");
    for (auto& ring : rings_) {
        if (ring.size() >= 2 && (ring.front() - ring.back()).norm() == 0.0)
            ring.pop_back();  // accept closed input, store open
        if (ring.size() < 3) throw config_error("polygon ring needs at least 3 vertices");
    }
    // normalize orientation: the largest ring is the outer one (counter-
    // clockwise), everything else is a hole (clockwise)
    std::size_t outer = 0;
    double outer_area = 0.0;
    for (std::size_t r = 0; r < rings_.size(); ++r) {
        const double a = std::abs(ring_signed_area(rings_[r]));
        if (a > outer_area) {
            outer_area = a;
            outer = r;
        }
    }
    for (std::size_t r = 0; r < rings_.size(); ++r) {
        const double a = ring_signed_area(rings_[r]);
        const bool want_ccw = r == outer;
        if ((a > 0) != want_ccw) std::reverse(rings_[r].begin(), rings_[r].end());
    }
    double inf = std::numeric_limits<double>::infinity();
    Eigen::Vector2d lo(inf, inf), hi(-inf, -inf);
    for (const auto& ring : rings_) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = ring[i];
            const auto& b = ring[(i + 1) % n];
            edges_.push_back({a.x(), a.y(), b.x(), b.y()});
            lo = lo.cwiseMin(a);
            hi = hi.cwiseMax(a);
        }
    }
    bbox_.lo = lo;
    bbox_.hi = hi;
    validate();
}

void PolygonBoundary::validate() const {
    // Reject self-intersections: proper crossings between non-adjacent edges.
    auto orient = [](double ax, double ay, double bx, double by, double cx, double cy) {
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    };
    const std::size_t m = edges_.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const Edge& e = edges_[i];
            const Edge& f = edges_[j];
            // skip edges sharing an endpoint (adjacent within a ring)
            if ((e.x0 == f.x0 && e.y0 == f.y0) || (e.x0 == f.x1 && e.y0 == f.y1) ||
                (e.x1 == f.x0 && e.y1 == f.y0) || (e.x1 == f.x1 && e.y1 == f.y1))
                continue;
            const double d1 = orient(e.x0, e.y0, e.x1, e.y1, f.x0, f.y0);
            const double d2 = orient(e.x0, e.y0, e.x1, e.y1, f.x1, f.y1);
            const double d3 = orient(f.x0, f.y0, f.x1, f.y1, e.x0, e.y0);
            const double d4 = orient(f.x0, f.y0, f.x1, f.y1, e.x1, e.y1);
            if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 &&
                d3 != 0 && d4 != 0)
                throw config_error("polygon boundary is self-intersecting");
        }
    }
}

double PolygonBoundary::box_overlap_area(double x, double y, double w) const {
    // Sutherland-Hodgman clip of each ring against the box; signed areas so
    // clockwise holes subtract
    const double lo_x = x - w, hi_x = x + w, lo_y = y - w, hi_y = y + w;
    double area = 0.0;
    std::vector<Eigen::Vector2d> poly, next;
    for (const auto& ring : rings_) {
        poly.assign(ring.begin(), ring.end());
        // clip by: x >= lo_x, x <= hi_x, y >= lo_y, y <= hi_y
        for (int side = 0; side < 4 && !poly.empty(); ++side) {
            auto keep = [&](const Eigen::Vector2d& p) {
                switch (side) {
                    case 0: return p.x() >= lo_x;
                    case 1: return p.x() <= hi_x;
                    case 2: return p.y() >= lo_y;
                    default: return p.y() <= hi_y;
                }
            };
            auto cross_pt = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                double t;
                switch (side) {
                    case 0: t = (lo_x - a.x()) / (b.x() - a.x()); break;
                    case 1: t = (hi_x - a.x()) / (b.x() - a.x()); break;
                    case 2: t = (lo_y - a.y()) / (b.y() - a.y()); break;
                    default: t = (hi_y - a.y()) / (b.y() - a.y()); break;
                }
                return Eigen::Vector2d(a + t * (b - a));
            };
            next.clear();
            for (std::size_t i = 0; i < poly.size(); ++i) {
                const Eigen::Vector2d& a = poly[i];
                const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
                const bool ka = keep(a), kb = keep(b);
                if (ka) next.push_back(a);
                if (ka != kb) next.push_back(cross_pt(a, b));
            }
            poly.swap(next);
        }
        double s2 = 0.0;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const auto& a = poly[i];
            const auto& b = poly[(i + 1) % poly.size()];
            s2 += a.x() * b.y() - b.x() * a.y();
        }
        area += 0.5 * s2;  // signed: holes are clockwise
    }
    return std::max(area, 0.0);
}

double PolygonBoundary::distance(double x, double y) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Edge& e : edges_) {
        const double dx = e.x1 - e.x0, dy = e.y1 - e.y0;
        const double len2 = dx * dx + dy * dy;
        double t = len2 > 0.0 ? ((x - e.x0) * dx + (y - e.y0) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double px = e.x0 + t * dx, py = e.y0 + t * dy;
        best = std::min(best, std::hypot(x - px, y - py));
    }
    return best;
}

bool PolygonBoundary::contains(double x, double y) const {
    if (x < bbox_.lo[0] || x > bbox_.hi[0] || y < bbox_.lo[1] || y > bbox_.hi[1])
        return false;
    bool in = false;
    for (const Edge& e : edges_) {
        // exactly on an edge -> outside
        const double cross = (e.x1 - e.x0) * (y - e.y0) - (e.y1 - e.y0) * (x - e.x0);
        if (cross == 0.0 && std::min(e.x0, e.x1) <= x && x <= std::max(e.x0, e.x1) &&
            std::min(e.y0, e.y1) <= y && y <= std::max(e.y0, e.y1))
            return false;
        if ((e.y0 > y) != (e.y1 > y)) {
            const double xi = e.x0 + (y - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0);
            if (x < xi) in = !in;
        }
    }
    return in;
}

// ---- Domain defaults ---------------------------------------------------------

double Domain::boundary_distance(const ChartPoint&) const {
    return std::numeric_limits<double>::infinity();
}

double Domain::visible_window_fraction(const ChartPoint& x, double w) const {
    if (!bounding_box()) return 1.0;
    const int d = dim();
    constexpr int kGrid = 8;
    ChartPoint p(d);
    std::vector<int> idx(d, 0);
    int total = 0, in = 0;
    while (true) {
        for (int k = 0; k < d; ++k)
            p[k] = x[k] + w * (2.0 * (idx[k] + 0.5) / kGrid - 1.0);
        ++total;
        in += inside(p) ? 1 : 0;
        int k = 0;
        while (k < d && ++idx[k] == kGrid) idx[k++] = 0;
        if (k == d) break;
    }
    return static_cast<double>(in) / total;
}

Eigen::MatrixXd Domain::metric(const ChartPoint& x) const {
    return Eigen::MatrixXd::Identity(dim(), x.size() ? dim() : dim());
}

std::vector<Eigen::MatrixXd> Domain::metric_jacobian(const ChartPoint& x) const {
    const int d = dim();
    const double h = 1e-5;
    std::vector<Eigen::MatrixXd> out(d);
    for (int j = 0; j < d; ++j) {
        ChartPoint xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        Eigen::MatrixXd diff = (metric(xp) - metric(xm)) / (2.0 * h);
        out[j] = 0.5 * (diff + diff.transpose());  // keep symmetric
    }
    return out;
}

AmbientPoint Domain::embed(const ChartPoint&) const {
    throw config_error("domain '" + name() + "' has no embedding");
}

// ---- EuclideanDomain ----------------------------------------------------------

EuclideanDomain::EuclideanDomain(int d, std::string name) : dim_(d), name_(std::move(name)) {
    if (d < 1) throw config_error("chart dimension must be >= 1");
    if (name_.empty()) name_ = "euclid" + std::to_string(d);
}

bool EuclideanDomain::inside(const ChartPoint& x) const { return x.allFinite(); }

std::vector<Eigen::MatrixXd> EuclideanDomain::metric_jacobian(const ChartPoint&) const {
    return std::vector<Eigen::MatrixXd>(dim_, Eigen::MatrixXd::Zero(dim_, dim_));
}

// ---- PolygonDomain -------------------------------------------------------------

PolygonDomain::PolygonDomain(PolygonBoundary boundary, std::string name)
    : boundary_(std::move(boundary)), name_(std::move(name)) {}

bool PolygonDomain::inside(const ChartPoint& x) const {
    return x.allFinite() && boundary_.contains(x[0], x[1]);
}

double PolygonDomain::boundary_distance(const ChartPoint& x) const {
    return boundary_.distance(x[0], x[1]);
}

double PolygonDomain::visible_window_fraction(const ChartPoint& x, double w) const {
    return boundary_.box_overlap_area(x[0], x[1], w) / (4.0 * w * w);
}

Eigen::MatrixXd PolygonDomain::metric(const ChartPoint& x) const {
    if (!embedding_) return Eigen::MatrixXd::Identity(2, 2);
    return metric_from_embedding(embedding_, x);
}

AmbientPoint PolygonDomain::embed(const ChartPoint& x) const {
    if (!embedding_) return Domain::embed(x);
    return embedding_(x);
}

void PolygonDomain::set_embedding(std::function<AmbientPoint(const ChartPoint&)> phi,
                                  int ambient_dim) {
    embedding_ = std::move(phi);
    ambient_dim_ = ambient_dim;
}

// ---- SwissRollDomain -------------------------------------------------------------

SwissRollDomain::SwissRollDomain(double r_min, double r_max, double z_min, double z_max)
    : r_min_(r_min), r_max_(r_max), z_min_(z_min), z_max_(z_max) {
    if (!(r_min > 0 && r_max > r_min && z_max > z_min))
        throw config_error("swiss roll bounds invalid");
}

bool SwissRollDomain::inside(const ChartPoint& x) const {
    return x.allFinite() && x[0] > r_min_ && x[0] < r_max_ && x[1] > z_min_ && x[1] < z_max_;
}

double SwissRollDomain::boundary_distance(const ChartPoint& x) const {
    return std::min(std::min(x[0] - r_min_, r_max_ - x[0]),
                    std::min(x[1] - z_min_, z_max_ - x[1]));
}

double SwissRollDomain::visible_window_fraction(const ChartPoint& x, double w) const {
    const double over_r = std::min(x[0] + w, r_max_) - std::max(x[0] - w, r_min_);
    const double over_z = std::min(x[1] + w, z_max_) - std::max(x[1] - w, z_min_);
    return std::max(over_r, 0.0) * std::max(over_z, 0.0) / (4.0 * w * w);
}

Eigen::MatrixXd SwissRollDomain::metric(const ChartPoint& x) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2);
    g(0, 0) = 1.0 + x[0] * x[0];
    return g;
}

std::vector<Eigen::MatrixXd> SwissRollDomain::metric_jacobian(const ChartPoint& x) const {
    std::vector<Eigen::MatrixXd> out(2, Eigen::MatrixXd::Zero(2, 2));
    out[0](0, 0) = 2.0 * x[0];
    return out;
}

AmbientPoint SwissRollDomain::embed(const ChartPoint& x) const {
    AmbientPoint p(3);
    const double r = x[0];
    p << r * std::cos(r), r * std::sin(r), x[1];
    return p;
}

std::optional<Box> SwissRollDomain::bounding_box() const {
    Box b;
    b.lo = Eigen::Vector2d(r_min_, z_min_);
    b.hi = Eigen::Vector2d(r_max_, z_max_);
    return b;
}

// ---- operations -------------------------------------------------------------------

MetricTensor metric_at(const Domain& domain, const ChartPoint& x) {
    Eigen::MatrixXd g = domain.metric(x);
    if (!g.allFinite())
        throw numerical_error("degenerate metric (non-finite) at " + point_str(x));
    g = 0.5 * (g + g.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw numerical_error("degenerate metric (not positive definite) at " + point_str(x));
    MetricTensor m;
    m.g = g;
    m.det_g = es.eigenvalues().prod();
    const Eigen::VectorXd inv = es.eigenvalues().cwiseInverse();
    m.inv_g = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    m.sqrt_inv_g =
        es.eigenvectors() * inv.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return m;
}

std::vector<Eigen::MatrixXd> metric_jacobian_at(const Domain& domain, const ChartPoint& x) {
    return domain.metric_jacobian(x);
}

AmbientPoint embed(const Domain& domain, const ChartPoint& x) { return domain.embed(x); }

Eigen::MatrixXd metric_from_embedding(
    const std::function<AmbientPoint(const ChartPoint&)>& phi, const ChartPoint& x,
    double step) {
    const int d = static_cast<int>(x.size());
    const AmbientPoint probe = phi(x);
    Eigen::MatrixXd jac(probe.size(), d);
    for (int j = 0; j < d; ++j) {
        ChartPoint xp = x, xm = x;
        xp[j] += step;
        xm[j] -= step;
        jac.col(j) = (phi(xp) - phi(xm)) / (2.0 * step);
    }
    return jac.transpose() * jac;
}

// ---- built-ins -----------------------------------------------------------------------

std::vector<Eigen::Vector2d> ushape_vertices(int arc_segments) {
    const double cx = 0.5;
    const double r_in = 0.5, r_out = 1.5;
    const double x_tip = 3.5;
    const double pi = 3.14159265358979323846;
    std::vector<Eigen::Vector2d> v;
    v.emplace_back(x_tip, -r_out);
    v.emplace_back(cx, -r_out);
    // outer arc from angle -pi/2 to -3pi/2 (through the left side)
    for (int i = 1; i < arc_segments; ++i) {
        const double a = -pi / 2 - pi * i / arc_segments;
        v.emplace_back(cx + r_out * std::cos(a), r_out * std::sin(a));
    }
    v.emplace_back(cx, r_out);
    v.emplace_back(x_tip, r_out);
    v.emplace_back(x_tip, r_in);
    v.emplace_back(cx, r_in);
    // inner arc back from pi/2 to -pi/2 (through the left side)
    for (int i = 1; i < arc_segments; ++i) {
        const double a = pi / 2 + pi * i / arc_segments;
        v.emplace_back(cx + r_in * std::cos(a), r_in * std::sin(a));
    }
    v.emplace_back(cx, -r_in);
    v.emplace_back(x_tip, -r_in);
    return v;
}

std::shared_ptr<const PolygonDomain> make_ushape() {
    return std::make_shared<PolygonDomain>(PolygonBoundary({ushape_vertices()}), "ushape");
}

std::shared_ptr<const EuclideanDomain> make_euclidean(int d) {
    return std::make_shared<EuclideanDomain>(d);
}

std::shared_ptr<const SwissRollDomain> make_swissroll() {
    const double pi = 3.14159265358979323846;
    return std::make_shared<SwissRollDomain>(1.5 * pi, 4.5 * pi, 0.0, 10.0);
}

DomainPtr make_domain(const std::string& spec) {
    if (spec == "ushape") return make_ushape();
    if (spec == "swissroll") return make_swissroll();
    if (spec == "euclid1") return make_euclidean(1);
    if (spec == "euclid2") return make_euclidean(2);
    if (spec.rfind("euclid:", 0) == 0) {
        const int d = std::stoi(spec.substr(7));
        return make_euclidean(d);
    }
    if (spec.rfind("file:", 0) == 0) return load_domain_file(spec.substr(5));
    throw config_error("unknown domain '" + spec + "'");
}

// ---- chart grids -----------------------------------------------------------------------

namespace {

std::vector<int> shape_for_cell(const Box& box, double h) {
    const int d = box.dim();
    std::vector<int> counts(d);
    for (int k = 0; k < d; ++k) {
        const double extent = box.hi[k] - box.lo[k];
        counts[k] = std::max(1, static_cast<int>(std::lround(extent / h)));
    }
    return counts;
}

}  // namespace

std::vector<ChartPoint> lattice_points(const Box& box, const std::vector<int>& shape) {
    const int d = box.dim();
    std::vector<ChartPoint> pts;
    std::vector<int> idx(d, 0);
    while (true) {
        ChartPoint p(d);
        for (int k = 0; k < d; ++k) {
            const double extent = box.hi[k] - box.lo[k];
            p[k] = box.lo[k] + extent * (idx[k] + 0.5) / shape[k];
        }
        pts.push_back(std::move(p));
        int k = 0;
        while (k < d && ++idx[k] == shape[k]) idx[k++] = 0;
        if (k == d) break;
    }
    return pts;
}

std::vector<int> grid_shape_for_target(const Domain& domain, const Box& box, int target) {
    if (target < 1) throw config_error("grid target must be >= 1");
    double best_err = std::numeric_limits<double>::infinity();
    double best_aniso = std::numeric_limits<double>::infinity();
    std::vector<int> best;
    auto consider = [&](const std::vector<int>& shape) {
        std::size_t count = 0;
        for (const auto& p : lattice_points(box, shape))
            if (domain.inside(p)) ++count;
        if (count == 0) return;
        const double err = std::abs(static_cast<double>(count) - target);
        double aniso = 0.0;  // prefer square-ish cells among exact hits
        for (int k = 0; k + 1 < static_cast<int>(shape.size()); ++k) {
            const double hk = (box.hi[k] - box.lo[k]) / shape[k];
            const double hk1 = (box.hi[k + 1] - box.lo[k + 1]) / shape[k + 1];
            aniso += std::abs(std::log(hk / hk1));
        }
        if (err < best_err || (err == best_err && aniso < best_aniso)) {
            best_err = err;
            best_aniso = aniso;
            best = shape;
        }
    };
    if (box.dim() == 2) {
        const int limit = std::max(2 * target + 8, 64);
        for (int nx = 1; nx <= limit; ++nx) {
            for (int ny = 1; ny <= limit; ++ny) {
                if (static_cast<std::int64_t>(nx) * ny > 4 * target + 64) continue;
                consider({nx, ny});
                if (best_err == 0.0 && best_aniso == 0.0) break;
            }
        }
    } else {
        const double max_extent = (box.hi - box.lo).maxCoeff();
        for (int i = 0; i < 400; ++i) {
            const double h = max_extent * std::pow(0.5, 0.035 * i);
            consider(shape_for_cell(box, h));
            if (best_err == 0.0) break;
        }
    }
    if (best.empty())
        throw config_error("no interior grid points found; try a finer grid");
    return best;
}

std::vector<ChartPoint> grid_points_inside(const Domain& domain, const Box& box, int target) {
    const auto shape = grid_shape_for_target(domain, box, target);
    std::vector<ChartPoint> pts;
    for (auto& p : lattice_points(box, shape))
        if (domain.inside(p)) pts.push_back(std::move(p));
    return pts;
}

Box domain_box_or(const Domain& domain, const std::optional<Box>& fallback) {
    if (auto b = domain.bounding_box()) return *b;
    if (fallback) return *fallback;
    throw config_error("domain '" + domain.name() + "' is unbounded; a box is required");
}

}  // namespace heatgp
