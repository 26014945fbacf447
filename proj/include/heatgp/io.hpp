#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "heatgp/gp.hpp"
#include "heatgp/sparse_gp.hpp"

namespace heatgp {

// ---- domain files -----------------------------------------------------------
// Header line `dim=<d> name=<id>`, optional `embedding=<builtin>` or
// `embedding=poly <ambient_dim>` followed by one polynomial per ambient
// coordinate; then rings as blank-line-separated blocks of "x y" lines
// (outer ring counter-clockwise, holes clockwise, first vertex repeated last).
DomainPtr load_domain_file(const std::filesystem::path& path);
void save_domain_file(const std::filesystem::path& path, const PolygonBoundary& boundary,
                      const std::string& name);

// Polynomials in chart variables x1..xd, e.g. "0.5*x1^2 - x2 + 1".
std::function<double(const ChartPoint&)> parse_polynomial(const std::string& text, int dim);

// ---- ensemble cache ----------------------------------------------------------
// Binary: magic/version header, domain name, start point, SimConfig, stream
// id, packed float32 positions, FNV-1a checksum over the payload.
void write_ensemble(const std::filesystem::path& path, const PathEnsemble& e);
PathEnsemble read_ensemble(const std::filesystem::path& path);

// Deterministic cache file name for one (config, domain, start, stream) tuple.
std::string ensemble_cache_name(const std::string& domain_name, const SimConfig& cfg,
                                std::uint64_t stream_id);

// Simulate-or-load: reuses a cached file when present and valid.
PathEnsemble cached_ensemble(const std::filesystem::path& cache_dir, const Domain& domain,
                             const ChartPoint& start, const SimConfig& cfg,
                             std::uint64_t stream_id, Exec exec = Exec::OpenMP);

// ---- observations --------------------------------------------------------------
// CSV with a header, d coordinate columns then the response column. With
// center=true the coordinate mean is subtracted and recorded.
Dataset ingest(const std::filesystem::path& path, const Domain& domain, bool center = false);

// Plain point list: d columns per row, comma or whitespace separated, '#'
// comments. No header, no response column.
Eigen::MatrixXd read_points_file(const std::filesystem::path& path, int dim);

// ---- model files -----------------------------------------------------------------
struct ModelFile {
    std::string domain_spec;
    SimConfig sim;
    WindowPolicy window;
    Hyperparams hp;
    Eigen::MatrixXd train_points;
    Eigen::VectorXd y;
    std::optional<Eigen::MatrixXd> inducing_points;
    std::string cache_dir;
    bool sparse() const { return inducing_points.has_value(); }
};

void write_model_file(const std::filesystem::path& path, const ModelFile& m);
ModelFile read_model_file(const std::filesystem::path& path);

// ---- text output ------------------------------------------------------------------
// All floating-point CSV output is written with 9 significant digits.
std::string format_g9(double v);

// Uncompressed binary PPM (P6) heatmap. Values are mapped onto a fixed
// blue->white->red ramp; NaN cells (masked) render gray.
void write_ppm_heatmap(const std::filesystem::path& path, const Eigen::MatrixXd& values,
                       double lo, double hi);

// Writes text atomically: temp file in the same directory, then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

// ---- run configs ---------------------------------------------------------------------
// `key = value` lines, '#' comments. CLI flags override file values.
struct RunConfig {
    std::map<std::string, std::string> kv;

    bool has(const std::string& key) const { return kv.count(key) > 0; }
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key) const;
    double num_or(const std::string& key, double fallback) const;
    std::int64_t int_or(const std::string& key, std::int64_t fallback) const;
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace heatgp
