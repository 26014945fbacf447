#include "heatgp/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "heatgp/errors.hpp"

namespace heatgp {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
        return 0.5 * (hi + v[mid - 1]);
    }
    return hi;
}

double rms(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
    return {mean, sd};
}

std::uint64_t replicate_seed(std::uint64_t base, int replicate) {
    return splitmix64(base + 0x9E37ull * static_cast<std::uint64_t>(replicate + 1));
}

}  // namespace

// ---- R^1 kernel validation -----------------------------------------------------

KernelValidationResult validate_r1_kernel(std::int64_t n_paths, double t, double w, int grid_n,
                                          double lo, double hi, std::uint64_t seed, Exec exec) {
    if (grid_n < 1 || hi <= lo) throw config_error("bad validation grid");
    const auto dom = make_euclidean(1);
    SimConfig cfg;
    cfg.n_paths = n_paths;
    cfg.n_steps = 40;
    cfg.dt = t / cfg.n_steps;
    cfg.seed = seed;
    ChartPoint start(1);
    start << 0.0;
    const PathEnsemble e =
        simulate_ensemble(*dom, start, cfg, make_stream_id(StreamRole::Train, 0), exec);

    KernelValidationResult out;
    std::vector<double> abs_errs, rel_errs;
    for (int i = 0; i < grid_n; ++i) {
        ChartPoint s(1);
        s << lo + (hi - lo) * (i + 0.5) / grid_n;
        const KernelEstimate est = estimate_density(e, s, cfg.n_steps, w, *dom);
        const double truth = closed_form_kernel(1, start, s, t);
        KernelValidationRow row;
        row.s = s[0];
        row.t = t;
        row.k_true = truth;
        row.k_hat = est.value;
        row.stderr_ = est.stderr_;
        row.rel_err = std::abs(est.value - truth) / truth;
        out.rows.push_back(row);
        abs_errs.push_back(std::abs(est.value - truth));
        rel_errs.push_back(row.rel_err);
    }
    out.median_abs_err = median(abs_errs);
    out.median_rel_err = median(rel_errs);
    return out;
}

std::string kernel_validation_csv(const KernelValidationResult& r) {
    std::ostringstream os;
    os << "s,t,K_true,K_hat,stderr,rel_err\n";
    for (const auto& row : r.rows)
        os << format_g9(row.s) << "," << format_g9(row.t) << "," << format_g9(row.k_true)
           << "," << format_g9(row.k_hat) << "," << format_g9(row.stderr_) << ","
           << format_g9(row.rel_err) << "\n";
    return os.str();
}

// ---- Wilcoxon signed-rank --------------------------------------------------------

double wilcoxon_signed_rank_p(const std::vector<double>& diffs) {
    std::vector<double> mags;
    for (double d : diffs)
        if (d != 0.0) mags.push_back(std::abs(d));
    const std::size_t n = mags.size();
    if (n == 0) return 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
    // midranks, doubled so ties stay integral
    std::vector<std::int64_t> rank2(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
        const std::int64_t sum2 = static_cast<std::int64_t>(i + 1 + j + 1);  // 2*avg rank
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = sum2;
        i = j + 1;
    }
    std::int64_t w_plus2 = 0;
    {
        std::size_t idx = 0;
        for (double d : diffs) {
            if (d == 0.0) continue;
            if (d > 0.0) w_plus2 += rank2[idx];
            ++idx;
        }
    }
    const std::int64_t total2 = std::accumulate(rank2.begin(), rank2.end(), std::int64_t{0});
    // exact null distribution of the doubled statistic by DP over sign flips
    std::vector<double> dist(static_cast<std::size_t>(total2) + 1, 0.0);
    dist[0] = 1.0;
    std::int64_t span = 0;
    for (std::size_t k = 0; k < n; ++k) {
        span += rank2[k];
        for (std::int64_t s = span; s >= rank2[k]; --s)
            dist[static_cast<std::size_t>(s)] += dist[static_cast<std::size_t>(s - rank2[k])];
    }
    const double denom = std::pow(2.0, static_cast<double>(n));
    double cdf_low = 0.0, cdf_high = 0.0;
    for (std::int64_t s = 0; s <= total2; ++s) {
        const double p = dist[static_cast<std::size_t>(s)] / denom;
        if (s <= w_plus2) cdf_low += p;
        if (s >= w_plus2) cdf_high += p;
    }
    return std::min(1.0, 2.0 * std::min(cdf_low, cdf_high));
}

// ---- hyperparameter equivalence ------------------------------------------------------

HyperparamEquivalence run_hyperparam_equivalence(int n_datasets, int n_points,
                                                 std::int64_t n_paths, double dt, int n_steps,
                                                 std::uint64_t seed, Exec exec) {
    const auto dom = make_euclidean(1);
    // unit spacing: one length-scale apart keeps the test Gram well conditioned
    Eigen::MatrixXd x(n_points, 1);
    for (int i = 0; i < n_points; ++i) x(i, 0) = static_cast<double>(i);

    Eigen::MatrixXd gram = rbf_gram(x, RbfParams{1.0, 1.0});
    gram.diagonal().array() += 1e-10;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw numerical_error("test covariance factorization failed");
    const NormalStream data_stream(seed, make_stream_id(StreamRole::Aux, 0));

    WindowPolicy policy;  // optimal with pilot
    HyperparamEquivalence out;
    std::vector<double> l_in, s_in, l_rbf, s_rbf;
    for (int r = 0; r < n_datasets; ++r) {
        Eigen::VectorXd z(n_points);
        for (int i = 0; i < n_points; ++i)
            data_stream.normals(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(i),
                                0, 1, &z[i]);
        const Eigen::VectorXd y = llt.matrixL() * z;

        SimConfig cfg;
        cfg.n_paths = n_paths;
        cfg.n_steps = n_steps;
        cfg.dt = dt;
        cfg.seed = replicate_seed(seed, r);

        const CovarianceGrid grid = build_covariance_grid(
            *dom, x,
            [&](std::int64_t i) {
                return simulate_ensemble(*dom, x.row(i).transpose(), cfg,
                                         make_stream_id(StreamRole::Train,
                                                        static_cast<std::uint64_t>(i)),
                                         exec);
            },
            policy, exec);
        const FitResult fit_in = fit(grid, y);
        const RbfFit fit_base = fit_rbf_gp(x, y);

        HyperparamReplicate rep;
        rep.l_in = std::sqrt(fit_in.hp.t);
        rep.sigma_in = fit_in.hp.sigma_h * std::pow(2.0 * kPi * fit_in.hp.t, -0.25);
        rep.l_rbf = fit_base.params.l;
        rep.sigma_rbf = fit_base.params.sigma_r;
        out.reps.push_back(rep);
        l_in.push_back(rep.l_in);
        s_in.push_back(rep.sigma_in);
        l_rbf.push_back(rep.l_rbf);
        s_rbf.push_back(rep.sigma_rbf);
    }
    out.median_l_in = median(l_in);
    out.median_sigma_in = median(s_in);
    out.median_l_rbf = median(l_rbf);
    out.median_sigma_rbf = median(s_rbf);
    std::vector<double> dl, ds;
    for (int r = 0; r < n_datasets; ++r) {
        dl.push_back(l_in[r] - l_rbf[r]);
        ds.push_back(s_in[r] - s_rbf[r]);
    }
    out.p_l = wilcoxon_signed_rank_p(dl);
    out.p_sigma = wilcoxon_signed_rank_p(ds);
    return out;
}

// ---- domain benchmarks ------------------------------------------------------------------

namespace {

struct BenchSetup {
    DomainPtr domain;
    Eigen::MatrixXd train;       // chart coords
    Eigen::MatrixXd test;
    Eigen::VectorXd truth_train;
    Eigen::VectorXd truth_test;
    Eigen::MatrixXd train_ambient;  // for the RBF baseline
    Eigen::MatrixXd test_ambient;
};

Eigen::MatrixXd stack_points(const std::vector<ChartPoint>& pts) {
    Eigen::MatrixXd m(pts.size(), pts.front().size());
    for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) = pts[i].transpose();
    return m;
}

Eigen::MatrixXd embed_rows(const Domain& dom, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), dom.ambient_dim());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out.row(i) = dom.embed(x.row(i).transpose()).transpose();
    return out;
}

BenchSetup make_bench_setup(const std::string& name, int n_train, int grid_target) {
    BenchSetup s;
    BenchmarkSpec spec;
    spec.name = name;
    if (name == "ushape")
        s.domain = make_ushape();
    else if (name == "swissroll")
        s.domain = make_swissroll();
    else
        throw config_error("unknown benchmark '" + name + "'");
    const Box box = domain_box_or(*s.domain);
    s.train = stack_points(grid_points_inside(*s.domain, box, n_train));
    s.test = stack_points(grid_points_inside(*s.domain, box, grid_target));
    s.truth_train.resize(s.train.rows());
    for (Eigen::Index i = 0; i < s.train.rows(); ++i)
        s.truth_train[i] = benchmark_truth(spec, s.train.row(i).transpose());
    s.truth_test.resize(s.test.rows());
    for (Eigen::Index i = 0; i < s.test.rows(); ++i)
        s.truth_test[i] = benchmark_truth(spec, s.test.row(i).transpose());
    if (s.domain->has_embedding()) {
        s.train_ambient = embed_rows(*s.domain, s.train);
        s.test_ambient = embed_rows(*s.domain, s.test);
    } else {
        s.train_ambient = s.train;
        s.test_ambient = s.test;
    }
    return s;
}

// One in-GP fit + prediction with in-memory ensembles.
Eigen::VectorXd ingp_predict_mean(const Domain& dom, const Eigen::MatrixXd& train,
                                  const Eigen::VectorXd& y, const Eigen::MatrixXd& test,
                                  const SimConfig& cfg, const WindowPolicy& policy,
                                  Exec exec) {
    std::vector<PathEnsemble> ens;
    ens.reserve(train.rows());
    for (Eigen::Index i = 0; i < train.rows(); ++i)
        ens.push_back(simulate_ensemble(
            dom, train.row(i).transpose(), cfg,
            make_stream_id(StreamRole::Train, static_cast<std::uint64_t>(i)), exec));
    const CovarianceGrid grid = build_covariance_grid(
        dom, train, [&](std::int64_t i) { return ens[static_cast<std::size_t>(i)]; }, policy,
        exec);
    const FitResult f = fit(grid, y);
    const int step = grid.t_index(f.hp.t) + 1;
    Eigen::MatrixXd cross(train.rows(), test.rows());
    for (Eigen::Index i = 0; i < train.rows(); ++i)
        cross.row(i) = density_block_at_step(dom, ens[static_cast<std::size_t>(i)], step, test,
                                             policy, exec)
                           .value.row(0);
    return predict(grid, f.hp, y, cross).mean;
}

BenchmarkResult run_domain_benchmark(const std::string& name, int replicates, double noise_sd,
                                     std::int64_t n_paths, int n_steps, double dt,
                                     std::uint64_t seed, Exec exec) {
    const BenchSetup setup = make_bench_setup(name, 20, 450);
    const NormalStream noise(seed, make_stream_id(StreamRole::Aux, 1));
    WindowPolicy policy;

    // inner-turn quarter of the swiss roll chart (center of the spiral)
    std::vector<char> inner(setup.test.rows(), 0);
    if (name == "swissroll") {
        const auto roll = std::dynamic_pointer_cast<const SwissRollDomain>(setup.domain);
        const double r_cut = roll->r_min() + 0.25 * (roll->r_max() - roll->r_min());
        for (Eigen::Index j = 0; j < setup.test.rows(); ++j)
            inner[j] = setup.test(j, 0) <= r_cut;
    }

    BenchmarkResult out;
    double inner_ss_ingp = 0.0, inner_ss_rbf = 0.0;
    std::int64_t inner_count = 0;
    std::vector<double> rms_ingp, rms_rbf;
    for (int r = 0; r < replicates; ++r) {
        Eigen::VectorXd y = setup.truth_train;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            double z;
            noise.normals(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(i), 0, 1,
                          &z);
            y[i] += noise_sd * z;
        }
        SimConfig cfg;
        cfg.n_paths = n_paths;
        cfg.n_steps = n_steps;
        cfg.dt = dt;
        cfg.seed = replicate_seed(seed, r);

        const Eigen::VectorXd mean_in =
            ingp_predict_mean(*setup.domain, setup.train, y, setup.test, cfg, policy, exec);
        const RbfFit base = fit_rbf_gp(setup.train_ambient, y);
        const Eigen::VectorXd mean_rbf =
            predict_rbf_gp(setup.train_ambient, y, base, setup.test_ambient).mean;

        BenchmarkReplicate rep;
        rep.rms_ingp = rms(mean_in, setup.truth_test);
        rep.rms_rbf = rms(mean_rbf, setup.truth_test);
        out.runs.push_back(rep);
        rms_ingp.push_back(rep.rms_ingp);
        rms_rbf.push_back(rep.rms_rbf);
        for (Eigen::Index j = 0; j < setup.test.rows(); ++j) {
            if (!inner[j]) continue;
            inner_ss_ingp += std::pow(mean_in[j] - setup.truth_test[j], 2);
            inner_ss_rbf += std::pow(mean_rbf[j] - setup.truth_test[j], 2);
            ++inner_count;
        }
    }
    std::tie(out.mean_ingp, out.sd_ingp) = mean_sd(rms_ingp);
    std::tie(out.mean_rbf, out.sd_rbf) = mean_sd(rms_rbf);
    if (inner_count > 0) {
        out.inner_rms_ingp = std::sqrt(inner_ss_ingp / inner_count);
        out.inner_rms_rbf = std::sqrt(inner_ss_rbf / inner_count);
    }
    return out;
}

}  // namespace

BenchmarkResult run_ushape_benchmark(int replicates, double noise_sd, std::int64_t n_paths,
                                     int n_steps, double dt, std::uint64_t seed, Exec exec) {
    return run_domain_benchmark("ushape", replicates, noise_sd, n_paths, n_steps, dt, seed,
                                exec);
}

BenchmarkResult run_swissroll_benchmark(int replicates, double noise_sd, std::int64_t n_paths,
                                        int n_steps, double dt, std::uint64_t seed, Exec exec) {
    return run_domain_benchmark("swissroll", replicates, noise_sd, n_paths, n_steps, dt, seed,
                                exec);
}

std::string benchmark_csv(const BenchmarkResult& r) {
    std::ostringstream os;
    os << "method,mean_rms,sd_rms\n";
    os << "normal-gp," << format_g9(r.mean_rbf) << "," << format_g9(r.sd_rbf) << "\n";
    os << "in-gp," << format_g9(r.mean_ingp) << "," << format_g9(r.sd_ingp) << "\n";
    return os.str();
}

// ---- config-driven pipelines ---------------------------------------------------------------

Eigen::MatrixXd ChartGrid::interior() const {
    std::int64_t count = 0;
    for (char c : inside) count += c != 0;
    Eigen::MatrixXd out(count, points.cols());
    std::int64_t k = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        if (inside[static_cast<std::size_t>(i)]) out.row(k++) = points.row(i);
    return out;
}

ChartGrid make_chart_grid(const Domain& domain, const Box& box, int target_inside) {
    ChartGrid g;
    g.box = box;
    g.shape = grid_shape_for_target(domain, box, target_inside);
    const auto pts = lattice_points(box, g.shape);
    g.points.resize(pts.size(), box.dim());
    g.inside.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        g.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
        g.inside[i] = domain.inside(pts[i]) ? 1 : 0;
    }
    return g;
}

namespace {

fs::path resolve_config_path(const RunConfig& cfg, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute() || !cfg.has("__dir")) return path;
    return fs::path(cfg.kv.at("__dir")) / path;
}

}  // namespace

DomainPtr domain_from_config(const RunConfig& cfg) {
    std::string spec = cfg.get("domain");
    if (spec.rfind("file:", 0) == 0)
        spec = "file:" + resolve_config_path(cfg, spec.substr(5)).string();
    return make_domain(spec);
}

Dataset data_from_config(const RunConfig& cfg, const Domain& domain) {
    const bool center = cfg.get_or("center", "none") == "mean";
    return ingest(resolve_config_path(cfg, cfg.get("data")), domain, center);
}

SimConfig sim_from_config(const RunConfig& cfg) {
    SimConfig sim;
    sim.n_paths = cfg.int_or("n_paths", 20000);
    sim.n_steps = static_cast<int>(cfg.int_or("n_steps", 100));
    sim.dt = cfg.num_or("dt", 0.1);
    sim.max_rejections = static_cast<int>(cfg.int_or("max_rejections", 1000));
    if (!cfg.has("seed")) throw config_error("config must set an explicit seed");
    sim.seed = static_cast<std::uint64_t>(cfg.int_or("seed", 0));
    return sim;
}

WindowPolicy window_from_config(const RunConfig& cfg) {
    WindowPolicy policy;
    const std::string mode = cfg.get_or("window_mode", "optimal");
    if (mode == "fixed")
        policy.mode = WindowPolicy::Mode::Fixed;
    else if (mode == "optimal")
        policy.mode = WindowPolicy::Mode::Optimal;
    else
        throw config_error("window_mode must be fixed or optimal");
    policy.fixed_w = cfg.num_or("window_fixed_w", 0.0);
    policy.pilot_fraction = cfg.num_or("window_pilot_fraction", 0.3);
    policy.width_scale = cfg.num_or("window_width_scale", 1.5);
    return policy;
}

fs::path cache_dir_from_config(const RunConfig& cfg) {
    const std::string raw = cfg.get_or("cache_dir", "");
    return raw.empty() ? fs::path() : resolve_config_path(cfg, raw);
}

std::optional<Eigen::MatrixXd> inducing_from_config(const RunConfig& cfg,
                                                    const Domain& domain) {
    const std::string spec = cfg.get_or("inducing", "none");
    if (spec == "none") return std::nullopt;
    if (spec.rfind("grid:", 0) == 0) {
        const Box box = domain_box_or(domain);
        return place_inducing_matrix(domain, box, std::stoi(spec.substr(5)));
    }
    if (spec.rfind("file:", 0) == 0)
        return read_points_file(resolve_config_path(cfg, spec.substr(5)), domain.dim());
    throw config_error("inducing must be none, grid:<m> or file:<path>");
}

namespace {

std::string fit_report(const FitResult& fit, const Hyperparams& hp, std::int64_t n,
                       std::int64_t m_inducing) {
    std::ostringstream os;
    os << "chosen_t = " << format_g9(hp.t) << "\n";
    os << "sigma_h = " << format_g9(hp.sigma_h) << "\n";
    os << "sigma_noise = " << format_g9(hp.sigma_noise) << "\n";
    os << "n = " << n << "\n";
    if (m_inducing > 0) os << "inducing = " << m_inducing << "\n";
    os << "unimodal_in_t = " << (fit.unimodal ? "yes" : "no (flagged)") << "\n";
    os << "# t sigma_h sigma_noise lml converged\n";
    for (const auto& row : fit.table)
        os << format_g9(row.t) << " " << format_g9(row.sigma_h) << " "
           << format_g9(row.sigma_noise) << " " << format_g9(row.lml) << " "
           << (row.converged ? 1 : 0) << "\n";
    return os.str();
}

}  // namespace

FitPipelineOutput run_fit_pipeline(const RunConfig& cfg, const fs::path& out_dir, Exec exec) {
    std::string domain_spec = cfg.get("domain");
    if (domain_spec.rfind("file:", 0) == 0)
        domain_spec = "file:" + resolve_config_path(cfg, domain_spec.substr(5)).string();
    const DomainPtr domain = make_domain(domain_spec);

    const Dataset data = data_from_config(cfg, *domain);
    const SimConfig sim = sim_from_config(cfg);
    const WindowPolicy policy = window_from_config(cfg);
    const fs::path cache_dir = cache_dir_from_config(cfg);

    FitPipelineOutput out;
    out.model.domain_spec = domain_spec;
    out.model.sim = sim;
    out.model.window = policy;
    out.model.train_points = data.points;
    out.model.y = data.y;
    out.model.cache_dir = cache_dir.string();

    const std::optional<Eigen::MatrixXd> inducing_opt = inducing_from_config(cfg, *domain);
    if (!inducing_opt) {
        out.fit = [&] {
            const CovarianceGrid grid = build_covariance_grid(
                *domain, data.points,
                [&](std::int64_t i) {
                    ++out.ensembles_simulated;
                    return cached_ensemble(
                        cache_dir, *domain, data.points.row(i).transpose(), sim,
                        make_stream_id(StreamRole::Train, static_cast<std::uint64_t>(i)),
                        exec);
                },
                policy, exec);
            return fit(grid, data.y);
        }();
    } else {
        const Eigen::MatrixXd& inducing = *inducing_opt;
        const SparseGrid grid = build_sparse_grid(
            *domain, inducing, data.points,
            [&](std::int64_t i) {
                ++out.ensembles_simulated;
                return cached_ensemble(
                    cache_dir, *domain, inducing.row(i).transpose(), sim,
                    make_stream_id(StreamRole::Inducing, static_cast<std::uint64_t>(i)), exec);
            },
            policy, exec);
        out.fit = sparse_fit(grid, data.y);
        out.model.inducing_points = inducing;
    }

    out.model.hp = out.fit.hp;
    out.report = fit_report(out.fit, out.fit.hp, data.n(),
                            out.model.inducing_points ? out.model.inducing_points->rows() : 0);
    fs::create_directories(out_dir);
    out.model_path = out_dir / "model.txt";
    out.report_path = out_dir / "report.txt";
    write_model_file(out.model_path, out.model);
    write_text_atomic(out.report_path, out.report);
    return out;
}

PredictPipelineOutput run_predict_pipeline(const ModelFile& model,
                                           const std::optional<int>& grid_target,
                                           const std::optional<Eigen::MatrixXd>& points,
                                           bool want_variance, bool simulate_test_ensembles,
                                           const std::string& cache_dir_override, Exec exec) {
    const DomainPtr domain = make_domain(model.domain_spec);
    const fs::path cache_dir =
        cache_dir_override.empty() ? fs::path(model.cache_dir) : fs::path(cache_dir_override);

    PredictPipelineOutput out;
    if (grid_target) {
        Box box;
        if (auto b = domain->bounding_box()) {
            box = *b;
        } else {
            // unbounded chart: pad the training hull
            box.lo = model.train_points.colwise().minCoeff().transpose();
            box.hi = model.train_points.colwise().maxCoeff().transpose();
            const Eigen::VectorXd pad = 0.25 * (box.hi - box.lo).cwiseMax(1e-6);
            box.lo -= pad;
            box.hi += pad;
        }
        out.grid = make_chart_grid(*domain, box, *grid_target);
        out.points = out.grid.points;
        out.inside = out.grid.inside;
        out.gridded = true;
    } else if (points) {
        out.points = *points;
        out.inside.resize(points->rows());
        for (Eigen::Index i = 0; i < points->rows(); ++i)
            out.inside[static_cast<std::size_t>(i)] =
                domain->inside(points->row(i).transpose()) ? 1 : 0;
    } else {
        throw config_error("predict needs a grid target or a points file");
    }

    // interior targets only; masked rows stay NaN
    std::vector<Eigen::Index> target_rows;
    for (Eigen::Index i = 0; i < out.points.rows(); ++i)
        if (out.inside[static_cast<std::size_t>(i)]) target_rows.push_back(i);
    Eigen::MatrixXd targets(target_rows.size(), out.points.cols());
    for (std::size_t i = 0; i < target_rows.size(); ++i)
        targets.row(static_cast<Eigen::Index>(i)) = out.points.row(target_rows[i]);

    const auto n = model.train_points.rows();
    const int step_hint = static_cast<int>(std::llround(model.hp.t / model.sim.dt));
    if (step_hint < 1 || step_hint > model.sim.n_steps)
        throw config_error("model diffusion time is off the simulated grid");

    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
    if (!model.sparse()) {
        // Rebuild Sigma_ff at the chosen t plus the cross block, one cached
        // ensemble at a time.
        Eigen::MatrixXd raw(n, n), raw_stderr(n, n);
        Eigen::MatrixXd cross(n, targets.rows());
        for (Eigen::Index i = 0; i < n; ++i) {
            const PathEnsemble e = cached_ensemble(
                cache_dir, *domain, model.train_points.row(i).transpose(), model.sim,
                make_stream_id(StreamRole::Train, static_cast<std::uint64_t>(i)), exec);
            const DensityBlock block = density_block_at_step(
                *domain, e, step_hint, model.train_points, model.window, exec);
            raw.row(i) = block.value.row(0);
            raw_stderr.row(i) = block.stderr_.row(0);
            if (targets.rows() > 0)
                cross.row(i) =
                    density_block_at_step(*domain, e, step_hint, targets, model.window, exec)
                        .value.row(0);
        }
        (void)raw_stderr;
        const Eigen::MatrixXd sigma = noise_floor_repair(0.5 * (raw + raw.transpose()), 0.0);
        std::optional<Eigen::VectorXd> self_diag;
        if (want_variance) {
            if (!simulate_test_ensembles)
                throw config_error(
                    "predictive variance for a dense model needs test-point ensembles; "
                    "rerun with --simulate-test-ensembles");
            Eigen::VectorXd diag(targets.rows());
            for (Eigen::Index j = 0; j < targets.rows(); ++j) {
                const PathEnsemble e = cached_ensemble(
                    cache_dir, *domain, targets.row(j).transpose(), model.sim,
                    make_stream_id(StreamRole::Test, static_cast<std::uint64_t>(j)), exec);
                diag[j] = density_block_at_step(*domain, e, step_hint, targets.row(j),
                                                model.window, exec)
                              .value(0, 0);
            }
            self_diag = diag;
        }
        const Predictive pred =
            predict_at(sigma, model.hp, model.y, cross, self_diag, std::nullopt);
        mean = pred.mean;
        variance = pred.variance;
    } else {
        const Eigen::MatrixXd& z = *model.inducing_points;
        const auto m = z.rows();
        // one pass per inducing ensemble over [inducing | train | targets]
        Eigen::MatrixXd uu_raw(m, m);
        Eigen::MatrixXd uf(m, n);
        Eigen::MatrixXd ustar(m, targets.rows());
        Eigen::MatrixXd block_targets(m + n + targets.rows(), z.cols());
        block_targets.topRows(m) = z;
        block_targets.middleRows(m, n) = model.train_points;
        block_targets.bottomRows(targets.rows()) = targets;
        Eigen::MatrixXd uu_stderr(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const PathEnsemble e = cached_ensemble(
                cache_dir, *domain, z.row(i).transpose(), model.sim,
                make_stream_id(StreamRole::Inducing, static_cast<std::uint64_t>(i)), exec);
            const DensityBlock block =
                density_block_at_step(*domain, e, step_hint, block_targets, model.window, exec);
            const Eigen::VectorXd row = block.value.row(0).transpose();
            uu_raw.row(i) = row.head(m).transpose();
            uu_stderr.row(i) = block.stderr_.row(0).head(m);
            uf.row(i) = row.segment(m, n).transpose();
            ustar.row(i) = row.tail(targets.rows()).transpose();
        }
        SparseModel sm;
        sm.inducing_points = z;
        sm.sigma_uu = regularize_inducing_cov(0.5 * (uu_raw + uu_raw.transpose()),
                                              inducing_noise_scale(uu_stderr));
        sm.sigma_uf = uf;
        sm.hp = model.hp;
        const Predictive pred = sparse_predict(sm, model.y, ustar);
        mean = pred.mean;
        variance = want_variance ? pred.variance : Eigen::VectorXd();
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.mean = Eigen::VectorXd::Constant(out.points.rows(), nan);
    if (variance.size() > 0)
        out.variance = Eigen::VectorXd::Constant(out.points.rows(), nan);
    for (std::size_t i = 0; i < target_rows.size(); ++i) {
        out.mean[target_rows[i]] = mean[static_cast<Eigen::Index>(i)];
        if (variance.size() > 0)
            out.variance[target_rows[i]] = variance[static_cast<Eigen::Index>(i)];
    }
    return out;
}

std::string predict_csv(const PredictPipelineOutput& out) {
    std::ostringstream os;
    const int d = static_cast<int>(out.points.cols());
    for (int k = 0; k < d; ++k) os << "x" << (k + 1) << ",";
    os << "inside,mean";
    const bool var = out.variance.size() > 0;
    if (var) os << ",variance";
    os << "\n";
    for (Eigen::Index i = 0; i < out.points.rows(); ++i) {
        for (int k = 0; k < d; ++k) os << format_g9(out.points(i, k)) << ",";
        const bool in = out.inside[static_cast<std::size_t>(i)] != 0;
        os << (in ? 1 : 0) << ",";
        if (in) os << format_g9(out.mean[i]);
        if (var) {
            os << ",";
            if (in) os << format_g9(out.variance[i]);
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace heatgp
