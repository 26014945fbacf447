// Compares the serial reference kernels against the OpenMP variants and
// checks that both produce identical output.

#include <chrono>
#include <cstring>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "heatgp/heat_kernel.hpp"
#include "heatgp/protocols.hpp"

using namespace heatgp;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename F>
double best_of(int reps, F&& f) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::cout << "threads: " << omp_get_max_threads() << "\n";
#else
    std::cout << "threads: 1 (OpenMP disabled)\n";
#endif
    std::cout << "kernel, size, serial_ms, openmp_ms, speedup, identical\n";

    const auto ushape = make_ushape();
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.n_steps = 50;
    cfg.dt = 0.1;
    cfg.seed = 99;
    ChartPoint start(2);
    start << 2.0, -1.0;

    PathEnsemble serial_e, omp_e;
    const double sim_serial = best_of(
        2, [&] { serial_e = simulate_ensemble(*ushape, start, cfg, 7, Exec::Serial); });
    const double sim_omp = best_of(
        2, [&] { omp_e = simulate_ensemble(*ushape, start, cfg, 7, Exec::OpenMP); });
    const bool sim_same =
        serial_e.positions.size() == omp_e.positions.size() &&
        std::memcmp(serial_e.positions.data(), omp_e.positions.data(),
                    serial_e.positions.size() * sizeof(float)) == 0;
    std::cout << "simulate_ensemble(ushape), " << cfg.n_paths << "x" << cfg.n_steps << ", "
              << sim_serial << ", " << sim_omp << ", " << sim_serial / sim_omp << ", "
              << (sim_same ? "yes" : "NO") << "\n";

    const Box box = domain_box_or(*ushape);
    const auto targets_vec = grid_points_inside(*ushape, box, 200);
    Eigen::MatrixXd targets(targets_vec.size(), 2);
    for (std::size_t i = 0; i < targets_vec.size(); ++i)
        targets.row(static_cast<Eigen::Index>(i)) = targets_vec[i].transpose();

    WindowPolicy policy;
    DensityBlock serial_b, omp_b;
    const double cnt_serial = best_of(
        2, [&] { serial_b = density_block(*ushape, serial_e, targets, policy, Exec::Serial); });
    const double cnt_omp = best_of(
        2, [&] { omp_b = density_block(*ushape, serial_e, targets, policy, Exec::OpenMP); });
    const bool cnt_same = (serial_b.value - omp_b.value).cwiseAbs().maxCoeff() == 0.0;
    std::cout << "density_block(ushape), " << targets.rows() << "x" << cfg.n_steps << ", "
              << cnt_serial << ", " << cnt_omp << ", " << cnt_serial / cnt_omp << ", "
              << (cnt_same ? "yes" : "NO") << "\n";

    const auto euclid = make_euclidean(1);
    ChartPoint origin = ChartPoint::Zero(1);
    SimConfig cfg1;
    cfg1.n_paths = 200000;
    cfg1.n_steps = 40;
    cfg1.dt = 0.25;
    cfg1.seed = 3;
    PathEnsemble flat_serial, flat_omp;
    const double flat_s = best_of(
        2, [&] { flat_serial = simulate_ensemble(*euclid, origin, cfg1, 0, Exec::Serial); });
    const double flat_p = best_of(
        2, [&] { flat_omp = simulate_ensemble(*euclid, origin, cfg1, 0, Exec::OpenMP); });
    const bool flat_same =
        std::memcmp(flat_serial.positions.data(), flat_omp.positions.data(),
                    flat_serial.positions.size() * sizeof(float)) == 0;
    std::cout << "simulate_ensemble(R1), " << cfg1.n_paths << "x" << cfg1.n_steps << ", "
              << flat_s << ", " << flat_p << ", " << flat_s / flat_p << ", "
              << (flat_same ? "yes" : "NO") << "\n";

    return (sim_same && cnt_same && flat_same) ? 0 : 1;
}
