#pragma once

#include <cstdint>
#include <vector>

#include "heatgp/geometry.hpp"
#include "heatgp/rng.hpp"

namespace heatgp {

// Execution policy for the data-parallel kernels. Both variants produce
// bit-identical results; the serial one is the reference the tests compare
// against and the benchmark baseline.
enum class Exec { Serial, OpenMP };

struct SimConfig {
    std::int64_t n_paths = 1000;
    int n_steps = 100;        // T; max diffusion time is n_steps * dt
    double dt = 0.01;
    int max_rejections = 1000;
    std::uint64_t seed = 0;

    bool operator==(const SimConfig&) const = default;
};

// Deterministic per-unit-time drift of the coordinate process (both sums of
// the Euler-Maruyama discretisation, noise excluded).
using DriftVector = Eigen::VectorXd;

// An ensemble of BM sample paths from one start point. positions holds the
// accepted state after each step, step-major:
//   positions[((step-1)*n_paths + path)*dim + k],  step in [1, n_steps].
// Stored in float32; every stored position satisfies inside(domain, .).
struct PathEnsemble {
    ChartPoint start;
    SimConfig config;
    int dim = 0;
    std::uint64_t stream_id = 0;
    std::string domain_name;
    std::vector<float> positions;

    const float* step_slice(int step_index) const {
        return positions.data() +
               static_cast<std::size_t>(step_index - 1) * config.n_paths * dim;
    }
    ChartPoint position(std::int64_t path, int step_index) const {
        const float* p = step_slice(step_index) + path * dim;
        ChartPoint x(dim);
        for (int k = 0; k < dim; ++k) x[k] = p[k];
        return x;
    }
    double t_of_step(int step_index) const { return step_index * config.dt; }
};

DriftVector drift_at(const Domain& domain, const ChartPoint& x);

// One Euler-Maruyama proposal x + mu*dt + sqrt(dt) * g^{-1/2} z. Deterministic
// given (x, dt, noise); not boundary-checked.
ChartPoint propose_step(const Domain& domain, const ChartPoint& x, double dt,
                        const Eigen::VectorXd& noise);

// Simulates n_paths paths of n_steps each, re-proposing any step that leaves
// the domain (Neumann rejection) until it lands inside. Throws resource_error
// when a step exceeds max_rejections, reporting path, step and point. Output
// is identical for identical (seed, stream_id) under any Exec / worker count.
PathEnsemble simulate_ensemble(const Domain& domain, const ChartPoint& start,
                               const SimConfig& cfg, std::uint64_t stream_id,
                               Exec exec = Exec::OpenMP);

}  // namespace heatgp
