#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace heatgp {

// Chart coordinates of a point (dimension = owning domain's chart dimension).
using ChartPoint = Eigen::VectorXd;
// Coordinates in the embedding space, when the domain has one.
using AmbientPoint = Eigen::VectorXd;

struct Box {
    Eigen::VectorXd lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
};

// Metric tensor at a point with the matrices the simulation needs derived
// once: g must be symmetric positive definite.
struct MetricTensor {
    Eigen::MatrixXd g;
    Eigen::MatrixXd inv_g;
    Eigen::MatrixXd sqrt_inv_g;
    double det_g = 0.0;
};

// A simple polygon boundary in chart coordinates: one outer ring
// (counter-clockwise) plus optional hole rings (clockwise). Rings are stored
// open; the file format writes them closed. Membership is even-odd ray
// casting; points exactly on an edge count as outside.
class PolygonBoundary {
public:
    PolygonBoundary() = default;
    explicit PolygonBoundary(std::vector<std::vector<Eigen::Vector2d>> rings);

    bool contains(double x, double y) const;
    double distance(double x, double y) const;
    // exact area of the polygon clipped to [x-w, x+w] x [y-w, y+w]
    double box_overlap_area(double x, double y, double w) const;
    const std::vector<std::vector<Eigen::Vector2d>>& rings() const { return rings_; }
    const Box& bounding_box() const { return bbox_; }

private:
    void validate() const;

    std::vector<std::vector<Eigen::Vector2d>> rings_;
    struct Edge {
        double x0, y0, x1, y1;
    };
    std::vector<Edge> edges_;
    Box bbox_;
};

// A domain is one chart: metric field, membership test, optional embedding.
// Instances are immutable after construction and safe to share across
// simulation workers.
class Domain {
public:
    virtual ~Domain() = default;

    virtual int dim() const = 0;
    virtual const std::string& name() const = 0;
    virtual bool inside(const ChartPoint& x) const = 0;

    // Identity by default (flat chart).
    virtual Eigen::MatrixXd metric(const ChartPoint& x) const;
    // d matrices dg/dx_j; central differences of metric() by default.
    virtual std::vector<Eigen::MatrixXd> metric_jacobian(const ChartPoint& x) const;

    virtual bool has_embedding() const { return false; }
    virtual AmbientPoint embed(const ChartPoint& x) const;
    virtual int ambient_dim() const { return dim(); }

    // True when metric() is the identity everywhere; lets the simulator skip
    // the drift/diffusion machinery.
    virtual bool flat() const { return false; }

    // Chart distance to the nearest boundary; +inf for unbounded domains.
    virtual double boundary_distance(const ChartPoint& x) const;

    // Fraction of the axis-aligned cube of half-width w around x that lies
    // inside the domain. Subgrid sample by default; exact for the built-ins.
    virtual double visible_window_fraction(const ChartPoint& x, double w) const;

    virtual std::optional<Box> bounding_box() const { return std::nullopt; }
};

using DomainPtr = std::shared_ptr<const Domain>;

// Unbounded R^d with the identity metric.
class EuclideanDomain final : public Domain {
public:
    explicit EuclideanDomain(int d, std::string name = "");

    int dim() const override { return dim_; }
    const std::string& name() const override { return name_; }
    bool inside(const ChartPoint& x) const override;
    std::vector<Eigen::MatrixXd> metric_jacobian(const ChartPoint& x) const override;
    bool flat() const override { return true; }

private:
    int dim_;
    std::string name_;
};

// Flat 2-D region bounded by a polygon, optionally with an embedding
// (user-loaded domains). With an embedding the metric comes from its
// numerical Jacobian unless an analytic metric field is supplied.
class PolygonDomain : public Domain {
public:
    PolygonDomain(PolygonBoundary boundary, std::string name);

    int dim() const override { return 2; }
    const std::string& name() const override { return name_; }
    bool inside(const ChartPoint& x) const override;
    double boundary_distance(const ChartPoint& x) const override;
    double visible_window_fraction(const ChartPoint& x, double w) const override;
    bool flat() const override { return !embedding_; }
    Eigen::MatrixXd metric(const ChartPoint& x) const override;
    bool has_embedding() const override { return static_cast<bool>(embedding_); }
    AmbientPoint embed(const ChartPoint& x) const override;
    int ambient_dim() const override { return embedding_ ? ambient_dim_ : 2; }
    std::optional<Box> bounding_box() const override { return boundary_.bounding_box(); }

    const PolygonBoundary& boundary() const { return boundary_; }

    void set_embedding(std::function<AmbientPoint(const ChartPoint&)> phi, int ambient_dim);

private:
    PolygonBoundary boundary_;
    std::string name_;
    std::function<AmbientPoint(const ChartPoint&)> embedding_;
    int ambient_dim_ = 2;
};

// Spiral band x(r,z) = (r cos r, r sin r, z) over a rectangle in (r, z).
// Metric diag(1+r^2, 1), with the analytic derivative dg/dr = [[2r,0],[0,0]].
class SwissRollDomain final : public Domain {
public:
    SwissRollDomain(double r_min, double r_max, double z_min, double z_max);

    int dim() const override { return 2; }
    const std::string& name() const override { return name_; }
    bool inside(const ChartPoint& x) const override;
    double boundary_distance(const ChartPoint& x) const override;
    double visible_window_fraction(const ChartPoint& x, double w) const override;
    Eigen::MatrixXd metric(const ChartPoint& x) const override;
    std::vector<Eigen::MatrixXd> metric_jacobian(const ChartPoint& x) const override;
    bool has_embedding() const override { return true; }
    AmbientPoint embed(const ChartPoint& x) const override;
    int ambient_dim() const override { return 3; }
    std::optional<Box> bounding_box() const override;

    double r_min() const { return r_min_; }
    double r_max() const { return r_max_; }
    double z_min() const { return z_min_; }
    double z_max() const { return z_max_; }

private:
    double r_min_, r_max_, z_min_, z_max_;
    std::string name_ = "swissroll";
};

// ---- operations ------------------------------------------------------------

// Metric with derived matrices; throws numerical_error (naming the point) on a
// non-finite or non-PD metric.
MetricTensor metric_at(const Domain& domain, const ChartPoint& x);

// d symmetric matrices dg/dx_j.
std::vector<Eigen::MatrixXd> metric_jacobian_at(const Domain& domain, const ChartPoint& x);

inline bool inside(const Domain& domain, const ChartPoint& x) { return domain.inside(x); }

AmbientPoint embed(const Domain& domain, const ChartPoint& x);

// Metric induced by an embedding, g_ij = dphi/dx_i . dphi/dx_j, with the
// Jacobian taken by central differences (step 1e-6).
Eigen::MatrixXd metric_from_embedding(const std::function<AmbientPoint(const ChartPoint&)>& phi,
                                      const ChartPoint& x, double step = 1e-6);

// ---- built-in domains ------------------------------------------------------

// U-shaped region: two arms of width 1 joined by a half-annulus centered at
// (0.5, 0), inner radius 0.5, outer radius 1.5; arms reach x = 3.5 and the cap
// reaches x = -1. Vertices are exposed so tests can pin them exactly.
std::vector<Eigen::Vector2d> ushape_vertices(int arc_segments = 16);
std::shared_ptr<const PolygonDomain> make_ushape();

std::shared_ptr<const EuclideanDomain> make_euclidean(int d);

// The swiss roll used by the shipped configs: r in [1.5*pi, 4.5*pi], z in [0, 10].
std::shared_ptr<const SwissRollDomain> make_swissroll();

// Resolves "ushape", "swissroll", "euclid1", "euclid2", "euclid:<d>" or
// "file:<path>".
DomainPtr make_domain(const std::string& spec);

// ---- chart grids -----------------------------------------------------------

// Per-axis cell counts of the cell-center lattice over `box` whose clipped
// interior count lands as close to `target` as possible. Deterministic.
std::vector<int> grid_shape_for_target(const Domain& domain, const Box& box, int target);

std::vector<ChartPoint> lattice_points(const Box& box, const std::vector<int>& shape);

// Cell-center lattice over `box` clipped to the domain, with the cell size
// chosen so the clipped count lands as close to `target` as possible.
// Deterministic; throws config_error if no interior point can be found.
std::vector<ChartPoint> grid_points_inside(const Domain& domain, const Box& box, int target);

Box domain_box_or(const Domain& domain, const std::optional<Box>& fallback = std::nullopt);

}  // namespace heatgp
