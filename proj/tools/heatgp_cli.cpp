// Command-line driver: simulation, kernel validation, fitting, prediction,
// benchmark reproduction and cache management.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "heatgp/errors.hpp"
#include "heatgp/protocols.hpp"

namespace fs = std::filesystem;
using namespace heatgp;

namespace {

std::string env_cache_dir() {
    const char* v = std::getenv("HEATGP_CACHE_DIR");
    return v ? v : "";
}

Exec exec_from_workers(int workers) {
    return workers == 1 ? Exec::Serial : Exec::OpenMP;
}

RunConfig config_with_overrides(const std::string& config_path,
                                const std::map<std::string, std::string>& overrides) {
    RunConfig cfg = load_run_config(config_path);
    for (const auto& [k, v] : overrides)
        if (!v.empty()) cfg.kv[k] = v;
    return cfg;
}

void write_raster(const fs::path& path, const PredictPipelineOutput& out) {
    if (!out.gridded || out.grid.shape.size() != 2)
        throw config_error("raster output needs a 2-D grid prediction");
    const int nx = out.grid.shape[0], ny = out.grid.shape[1];
    Eigen::MatrixXd img(ny, nx);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            // lattice is x-fastest; flip y so north is up
            const double v = out.mean[static_cast<Eigen::Index>(iy) * nx + ix];
            img(ny - 1 - iy, ix) = v;
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    write_ppm_heatmap(path, img, lo, hi);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-process regression on constrained domains and manifolds with "
                 "Brownian-motion heat-kernel covariances"};
    app.require_subcommand(1);

    int workers = 0;  // 0 = all
    app.add_option("--workers", workers, "worker threads (1 = serial reference kernels)");

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "simulate and cache BM ensembles");
    std::string sim_config, sim_cache, sim_data_override, sim_out;
    sim_cmd->add_option("--config", sim_config, "run config file")->required();
    sim_cmd->add_option("--cache-dir", sim_cache, "cache directory override");
    sim_cmd->add_option("--data", sim_data_override, "data file override");

    // ---- kernel-validate ----
    auto* kv_cmd = app.add_subcommand("kernel-validate",
                                      "estimate the R^1 transition density against the "
                                      "closed-form heat kernel");
    std::vector<std::int64_t> kv_paths{300, 3000, 30000};
    double kv_t = 10.0, kv_w = 0.5, kv_lo = -9.0, kv_hi = 9.0;
    int kv_grid = 70;
    std::uint64_t kv_seed = 20240901;
    std::string kv_out = "kernel_validation.csv";
    kv_cmd->add_option("--n-paths", kv_paths, "path counts (repeatable)");
    kv_cmd->add_option("--t", kv_t, "diffusion time");
    kv_cmd->add_option("--w", kv_w, "window half-width");
    kv_cmd->add_option("--grid-n", kv_grid, "number of grid targets");
    kv_cmd->add_option("--lo", kv_lo, "grid lower bound");
    kv_cmd->add_option("--hi", kv_hi, "grid upper bound");
    kv_cmd->add_option("--seed", kv_seed, "rng seed");
    kv_cmd->add_option("--out", kv_out, "output CSV (per-target rows, largest N)");

    // ---- fit ----
    auto* fit_cmd = app.add_subcommand("fit", "fit a model from a run config");
    std::string fit_config, fit_out_dir = "out", fit_cache, fit_data, fit_seed, fit_npaths,
                fit_inducing;
    fit_cmd->add_option("--config", fit_config, "run config file")->required();
    fit_cmd->add_option("--out-dir", fit_out_dir, "output directory");
    fit_cmd->add_option("--cache-dir", fit_cache, "cache directory override");
    fit_cmd->add_option("--data", fit_data, "data file override");
    fit_cmd->add_option("--seed", fit_seed, "seed override");
    fit_cmd->add_option("--n-paths", fit_npaths, "path count override");
    fit_cmd->add_option("--inducing", fit_inducing, "inducing spec override");

    // ---- predict ----
    auto* pred_cmd = app.add_subcommand("predict", "predict from a fitted model");
    std::string pred_model, pred_points, pred_out = "predictions.csv", pred_raster,
                pred_cache;
    int pred_grid = 0;
    bool pred_variance = false, pred_sim_test = false;
    pred_cmd->add_option("--model", pred_model, "model file")->required();
    pred_cmd->add_option("--grid", pred_grid, "target number of interior grid points");
    pred_cmd->add_option("--points", pred_points, "points file (d columns)");
    pred_cmd->add_option("--out", pred_out, "output CSV");
    pred_cmd->add_option("--raster", pred_raster, "PPM heatmap of the predictive mean");
    pred_cmd->add_option("--cache-dir", pred_cache, "cache directory override");
    pred_cmd->add_flag("--variance", pred_variance, "emit predictive variance");
    pred_cmd->add_flag("--simulate-test-ensembles", pred_sim_test,
                       "simulate test-point ensembles (dense-model variance)");

    // ---- benchmark ----
    auto* bench_cmd = app.add_subcommand("benchmark", "reproduce the domain benchmarks");
    std::string bench_spec = "ushape", bench_out = "benchmark.csv";
    int bench_reps = 10, bench_noise_db = 30, bench_steps = 0;
    double bench_noise_sd = -1.0, bench_dt = 0.0;
    std::int64_t bench_paths = 20000;
    std::uint64_t bench_seed = 20240901;
    bench_cmd->add_option("--spec", bench_spec, "ushape or swissroll");
    bench_cmd->add_option("--replicates", bench_reps, "number of noise replicates");
    bench_cmd->add_option("--noise-db", bench_noise_db, "signal-to-noise (30 or 10)");
    bench_cmd->add_option("--noise-sd", bench_noise_sd, "noise sd (overrides --noise-db)");
    bench_cmd->add_option("--n-paths", bench_paths, "BM paths per start point");
    bench_cmd->add_option("--n-steps", bench_steps, "BM steps (0 = spec default)");
    bench_cmd->add_option("--dt", bench_dt, "BM step size (0 = spec default)");
    bench_cmd->add_option("--seed", bench_seed, "rng seed");
    bench_cmd->add_option("--out", bench_out, "output CSV");

    // ---- cache ----
    auto* cache_cmd = app.add_subcommand("cache", "inspect or clear the ensemble cache");
    std::string cache_action = "list", cache_dir_opt;
    cache_cmd->add_option("action", cache_action, "list or clear")->required();
    cache_cmd->add_option("--cache-dir", cache_dir_opt, "cache directory");

    CLI11_PARSE(app, argc, argv);
#ifdef _OPENMP
    if (workers > 1) omp_set_num_threads(workers);
#endif
    const Exec exec = exec_from_workers(workers);

    try {
        if (*sim_cmd) {
            RunConfig cfg = config_with_overrides(
                sim_config, {{"cache_dir", sim_cache.empty() ? env_cache_dir() : sim_cache},
                             {"data", sim_data_override}});
            const fs::path cache_dir = cache_dir_from_config(cfg);
            if (cache_dir.empty())
                throw config_error("simulate needs a cache_dir (config or --cache-dir)");
            const DomainPtr domain = domain_from_config(cfg);
            const Dataset data = data_from_config(cfg, *domain);
            const SimConfig sim = sim_from_config(cfg);
            const auto inducing = inducing_from_config(cfg, *domain);
            const Eigen::MatrixXd& starts = inducing ? *inducing : data.points;
            const StreamRole role = inducing ? StreamRole::Inducing : StreamRole::Train;
            for (Eigen::Index i = 0; i < starts.rows(); ++i)
                cached_ensemble(cache_dir, *domain, starts.row(i).transpose(), sim,
                                make_stream_id(role, static_cast<std::uint64_t>(i)), exec);
            std::cout << "cached " << starts.rows() << " ensembles in "
                      << cache_dir.string() << "\n";
        } else if (*kv_cmd) {
            std::string last_csv;
            for (std::int64_t n : kv_paths) {
                const auto result =
                    validate_r1_kernel(n, kv_t, kv_w, kv_grid, kv_lo, kv_hi, kv_seed, exec);
                std::cout << "N=" << n
                          << " median_abs_err=" << format_g9(result.median_abs_err)
                          << " median_rel_err=" << format_g9(result.median_rel_err) << "\n";
                last_csv = kernel_validation_csv(result);
            }
            write_text_atomic(kv_out, last_csv);
        } else if (*fit_cmd) {
            RunConfig cfg = config_with_overrides(
                fit_config,
                {{"cache_dir", fit_cache.empty() ? env_cache_dir() : fit_cache},
                 {"data", fit_data},
                 {"seed", fit_seed},
                 {"n_paths", fit_npaths},
                 {"inducing", fit_inducing}});
            const auto out = run_fit_pipeline(cfg, fit_out_dir, exec);
            std::cout << "model: " << out.model_path.string() << "\n"
                      << "report: " << out.report_path.string() << "\n"
                      << "t=" << format_g9(out.fit.hp.t)
                      << " sigma_h=" << format_g9(out.fit.hp.sigma_h)
                      << " sigma_noise=" << format_g9(out.fit.hp.sigma_noise)
                      << " ensembles=" << out.ensembles_simulated << "\n";
        } else if (*pred_cmd) {
            const ModelFile model = read_model_file(pred_model);
            std::optional<int> grid_target;
            std::optional<Eigen::MatrixXd> points;
            if (pred_grid > 0) grid_target = pred_grid;
            if (!pred_points.empty())
                points = read_points_file(pred_points,
                                          static_cast<int>(model.train_points.cols()));
            const std::string cache_override =
                pred_cache.empty() ? env_cache_dir() : pred_cache;
            const auto out = run_predict_pipeline(model, grid_target, points, pred_variance,
                                                  pred_sim_test, cache_override, exec);
            write_text_atomic(pred_out, predict_csv(out));
            if (!pred_raster.empty()) write_raster(pred_raster, out);
            std::cout << "wrote " << pred_out << " (" << out.points.rows() << " rows)\n";
        } else if (*bench_cmd) {
            double sd = bench_noise_sd;
            if (sd < 0.0) {
                if (bench_noise_db == 30)
                    sd = 0.1;
                else if (bench_noise_db == 10)
                    sd = 1.0;
                else
                    throw config_error("--noise-db must be 30 or 10 (or use --noise-sd)");
            }
            BenchmarkResult result;
            if (bench_spec == "ushape") {
                const int steps = bench_steps > 0 ? bench_steps : 50;
                const double dt = bench_dt > 0 ? bench_dt : 0.12;
                result = run_ushape_benchmark(bench_reps, sd, bench_paths, steps, dt,
                                              bench_seed, exec);
            } else if (bench_spec == "swissroll") {
                const int steps = bench_steps > 0 ? bench_steps : 100;
                const double dt = bench_dt > 0 ? bench_dt : 0.5;
                result = run_swissroll_benchmark(bench_reps, sd, bench_paths, steps, dt,
                                                 bench_seed, exec);
            } else {
                throw config_error("--spec must be ushape or swissroll");
            }
            write_text_atomic(bench_out, benchmark_csv(result));
            std::cout << benchmark_csv(result);
        } else if (*cache_cmd) {
            const std::string dir = !cache_dir_opt.empty() ? cache_dir_opt : env_cache_dir();
            if (dir.empty()) throw config_error("cache needs --cache-dir or HEATGP_CACHE_DIR");
            if (cache_action == "list") {
                std::uintmax_t total = 0;
                int count = 0;
                if (fs::exists(dir))
                    for (const auto& entry : fs::directory_iterator(dir)) {
                        if (entry.path().extension() != ".bin") continue;
                        std::cout << entry.path().filename().string() << " "
                                  << entry.file_size() << "\n";
                        total += entry.file_size();
                        ++count;
                    }
                std::cout << count << " files, " << total << " bytes\n";
            } else if (cache_action == "clear") {
                int removed = 0;
                if (fs::exists(dir))
                    for (const auto& entry : fs::directory_iterator(dir))
                        if (entry.path().extension() == ".bin" &&
                            entry.path().filename().string().rfind("ens_", 0) == 0) {
                            fs::remove(entry.path());
                            ++removed;
                        }
                std::cout << "removed " << removed << " cache files\n";
            } else {
                throw config_error("cache action must be list or clear");
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    }
    return 0;
}
