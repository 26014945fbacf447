// Generates the shipped two-basin sea example: a boundary polygon shaped like
// a lake split by a peninsula (water connects only through a northern
// channel), a 485-point synthetic chlorophyll dataset, and an uneven variant
// with the southern half of the western basin removed. Everything is
// deterministic; the committed files under data/ are this tool's output.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "heatgp/io.hpp"
#include "heatgp/rng.hpp"

using namespace heatgp;
namespace fs = std::filesystem;

namespace {

double truth_field(double x, double y) {
    // smooth within each basin, sharp contrast across the peninsula
    return 2.2 + 0.9 * std::tanh(2.5 * x) * std::exp(-0.5 * std::pow(y / 0.7, 2)) +
           0.5 * std::sin(1.3 * x) * std::cos(1.1 * y) - 0.3 * y;
}

std::vector<Eigen::Vector2d> boundary_vertices() {
    return {
        {-1.00, -1.10}, {-0.45, -1.15}, {-0.35, -0.40}, {-0.28, 0.20},  {0.00, 0.62},
        {0.28, 0.20},   {0.35, -0.40},  {0.45, -1.15},  {0.90, -1.20},  {1.50, -0.90},
        {1.90, -0.30},  {1.80, 0.40},   {1.20, 1.00},   {0.50, 1.15},   {0.00, 1.20},
        {-0.50, 1.15},  {-1.20, 1.00},  {-1.70, 0.50},  {-1.90, -0.20}, {-1.60, -0.80},
    };
}

double shoelace_area(const std::vector<Eigen::Vector2d>& v) {
    double a = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path out_dir = argc > 1 ? argv[1] : "data";
    fs::create_directories(out_dir);

    const auto verts = boundary_vertices();
    if (shoelace_area(verts) <= 0.0) {
        std::cerr << "outer ring must be counter-clockwise\n";
        return 1;
    }
    const PolygonBoundary boundary({verts});
    save_domain_file(out_dir / "twinsea_boundary.txt", boundary, "twinsea");
    const PolygonDomain domain(boundary, "twinsea");

    // 485 observation sites, uniform over the water by rejection sampling
    const int n_target = 485;
    const Box box = boundary.bounding_box();
    std::ostringstream full, uneven;
    full << "x,y,chl\n";
    uneven << "x,y,chl\n";
    const NormalStream noise(424242, make_stream_id(StreamRole::Aux, 9));
    std::uint64_t state = 987654321;
    auto next_u = [&state] {
        state = splitmix64(state);
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    int kept = 0, removed_region = 0;
    for (int i = 0; kept < n_target && i < 1000000; ++i) {
        const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * next_u();
        const double y = box.lo[1] + (box.hi[1] - box.lo[1]) * next_u();
        ChartPoint p(2);
        p << x, y;
        if (!domain.inside(p)) continue;
        double z;
        noise.normals(static_cast<std::uint32_t>(kept), 0, 0, 1, &z);
        const double chl = truth_field(x, y) + 0.15 * z;
        full << format_g9(x) << "," << format_g9(y) << "," << format_g9(chl) << "\n";
        const bool in_removed_region = x < -0.30 && y < -0.15;
        if (!in_removed_region)
            uneven << format_g9(x) << "," << format_g9(y) << "," << format_g9(chl) << "\n";
        else
            ++removed_region;
        ++kept;
    }
    write_text_atomic(out_dir / "twinsea_chl.csv", full.str());
    write_text_atomic(out_dir / "twinsea_chl_west_removed.csv", uneven.str());
    std::cout << "wrote " << kept << " observations (" << removed_region
              << " removed in the uneven variant) to " << out_dir.string() << "\n";
    return 0;
}
