#pragma once

#include <filesystem>

#include "heatgp/baseline.hpp"
#include "heatgp/io.hpp"

namespace heatgp {

// End-to-end experiment workflows. The CLI subcommands and the acceptance
// suite both drive these, so a config file and a test exercise the same code.

// ---- R^1 kernel validation ----------------------------------------------------

struct KernelValidationRow {
    double s, t, k_true, k_hat, stderr_, rel_err;
};

struct KernelValidationResult {
    std::vector<KernelValidationRow> rows;
    double median_abs_err = 0.0;
    double median_rel_err = 0.0;
};

// Estimates the BM transition density on R at `grid_n` equally spaced targets
// strictly inside (lo, hi) against the closed-form heat kernel.
KernelValidationResult validate_r1_kernel(std::int64_t n_paths, double t, double w, int grid_n,
                                          double lo, double hi, std::uint64_t seed,
                                          Exec exec = Exec::OpenMP);

std::string kernel_validation_csv(const KernelValidationResult& r);

// ---- hyperparameter equivalence --------------------------------------------------

struct HyperparamReplicate {
    double l_in = 0.0, sigma_in = 0.0;    // heat-kernel fit mapped to RBF scale
    double l_rbf = 0.0, sigma_rbf = 0.0;  // direct RBF fit
};

struct HyperparamEquivalence {
    std::vector<HyperparamReplicate> reps;
    double median_l_in = 0.0, median_sigma_in = 0.0;
    double median_l_rbf = 0.0, median_sigma_rbf = 0.0;
    double p_l = 1.0, p_sigma = 1.0;  // exact Wilcoxon signed-rank, two-sided
};

// Datasets of n_points equally spaced on [0, 10], responses drawn from an
// RBF(l=1, sigma_r=1) GP; fits both models per dataset.
HyperparamEquivalence run_hyperparam_equivalence(int n_datasets, int n_points,
                                                 std::int64_t n_paths, double dt, int n_steps,
                                                 std::uint64_t seed, Exec exec = Exec::OpenMP);

// Exact two-sided Wilcoxon signed-rank p-value (zeros dropped, midranks).
double wilcoxon_signed_rank_p(const std::vector<double>& diffs);

// ---- domain benchmarks -----------------------------------------------------------

struct BenchmarkReplicate {
    double rms_ingp = 0.0, rms_rbf = 0.0;
};

struct BenchmarkResult {
    std::vector<BenchmarkReplicate> runs;
    double mean_ingp = 0.0, sd_ingp = 0.0;
    double mean_rbf = 0.0, sd_rbf = 0.0;
    // swiss roll only: rms restricted to the inner-turn quarter of the chart
    double inner_rms_ingp = 0.0, inner_rms_rbf = 0.0;
};

BenchmarkResult run_ushape_benchmark(int replicates, double noise_sd, std::int64_t n_paths,
                                     int n_steps, double dt, std::uint64_t seed,
                                     Exec exec = Exec::OpenMP);

BenchmarkResult run_swissroll_benchmark(int replicates, double noise_sd, std::int64_t n_paths,
                                        int n_steps, double dt, std::uint64_t seed,
                                        Exec exec = Exec::OpenMP);

std::string benchmark_csv(const BenchmarkResult& r);

// ---- config-driven pipelines --------------------------------------------------------

struct ChartGrid {
    Eigen::MatrixXd points;     // full lattice, row-major over the box
    std::vector<char> inside;
    std::vector<int> shape;     // per-axis counts
    Box box;
    Eigen::MatrixXd interior() const;
};

ChartGrid make_chart_grid(const Domain& domain, const Box& box, int target_inside);

// Config accessors shared by the subcommands (paths resolve relative to the
// config file's directory).
DomainPtr domain_from_config(const RunConfig& cfg);
Dataset data_from_config(const RunConfig& cfg, const Domain& domain);
SimConfig sim_from_config(const RunConfig& cfg);
WindowPolicy window_from_config(const RunConfig& cfg);
std::filesystem::path cache_dir_from_config(const RunConfig& cfg);
// none -> empty; grid:<m> -> clipped lattice; file:<path> -> point list
std::optional<Eigen::MatrixXd> inducing_from_config(const RunConfig& cfg,
                                                    const Domain& domain);

struct FitPipelineOutput {
    ModelFile model;
    FitResult fit;
    int ensembles_simulated = 0;  // == m for sparse fits, n for dense
    std::string report;
    std::filesystem::path model_path;
    std::filesystem::path report_path;
};

// Reads domain/data/simulation settings from the config, simulates (or loads
// cached) ensembles, fits, and writes <out_dir>/model.txt and report.txt.
FitPipelineOutput run_fit_pipeline(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                   Exec exec = Exec::OpenMP);

struct PredictPipelineOutput {
    Eigen::MatrixXd points;
    std::vector<char> inside;
    Eigen::VectorXd mean;      // entries only defined where inside
    Eigen::VectorXd variance;  // empty unless requested
    ChartGrid grid;            // populated for grid predictions (raster layout)
    bool gridded = false;
};

PredictPipelineOutput run_predict_pipeline(const ModelFile& model,
                                           const std::optional<int>& grid_target,
                                           const std::optional<Eigen::MatrixXd>& points,
                                           bool want_variance, bool simulate_test_ensembles,
                                           const std::string& cache_dir_override,
                                           Exec exec = Exec::OpenMP);

std::string predict_csv(const PredictPipelineOutput& out);

}  // namespace heatgp
