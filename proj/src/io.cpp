#include "heatgp/io.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "heatgp/errors.hpp"

namespace heatgp {

namespace fs = std::filesystem;

// ---- polynomial parser ---------------------------------------------------------

namespace {

struct Monomial {
    double coeff = 0.0;
    std::vector<int> powers;  // per chart variable
};

// Grammar: term (('+'|'-') term)*, term = factor ('*' factor)*,
// factor = number | x<k> ['^' int]. Whitespace ignored.
std::vector<Monomial> parse_monomials(const std::string& text, int dim) {
    std::vector<Monomial> out;
    std::size_t i = 0;
    auto skip = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    auto fail = [&](const std::string& why) {
        throw config_error("polynomial parse error at position " + std::to_string(i) + ": " +
                           why + " in '" + text + "'");
    };
    skip();
    while (i < text.size()) {
        double sign = 1.0;
        skip();
        while (i < text.size() && (text[i] == '+' || text[i] == '-')) {
            if (text[i] == '-') sign = -sign;
            ++i;
            skip();
        }
        if (i >= text.size()) fail("dangling sign");
        Monomial m;
        m.coeff = sign;
        m.powers.assign(dim, 0);
        bool saw_factor = false;
        while (true) {
            skip();
            if (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) ||
                                    text[i] == '.')) {
                std::size_t used = 0;
                m.coeff *= std::stod(text.substr(i), &used);
                i += used;
                saw_factor = true;
            } else if (i < text.size() && text[i] == 'x') {
                ++i;
                std::size_t used = 0;
                int var = 0;
                try {
                    var = std::stoi(text.substr(i), &used);
                } catch (...) {
                    fail("expected variable index after 'x'");
                }
                i += used;
                if (var < 1 || var > dim) fail("variable index out of range");
                int power = 1;
                skip();
                if (i < text.size() && text[i] == '^') {
                    ++i;
                    try {
                        power = std::stoi(text.substr(i), &used);
                    } catch (...) {
                        fail("expected exponent after '^'");
                    }
                    i += used;
                    if (power < 0) fail("negative exponent");
                }
                m.powers[var - 1] += power;
                saw_factor = true;
            } else {
                fail("expected number or variable");
            }
            skip();
            if (i < text.size() && text[i] == '*') {
                ++i;
                continue;
            }
            break;
        }
        if (!saw_factor) fail("empty term");
        out.push_back(std::move(m));
        skip();
    }
    if (out.empty()) throw config_error("empty polynomial '" + text + "'");
    return out;
}

}  // namespace

std::function<double(const ChartPoint&)> parse_polynomial(const std::string& text, int dim) {
    auto monomials = parse_monomials(text, dim);
    return [monomials, dim](const ChartPoint& x) {
        double v = 0.0;
        for (const auto& m : monomials) {
            double term = m.coeff;
            for (int k = 0; k < dim; ++k)
                for (int p = 0; p < m.powers[k]; ++p) term *= x[k];
            v += term;
        }
        return v;
    };
}

// ---- domain files ------------------------------------------------------------------

DomainPtr load_domain_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open domain file " + path.string());
    std::string line;
    int lineno = 0;

    int dim = 0;
    std::string name;
    std::string embedding_spec;
    std::vector<std::string> poly_lines;
    int poly_ambient = 0;

    // header block
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) break;
        if (line[0] == '#') continue;
        std::istringstream ls(line);
        std::string token;
        bool header = false;
        while (ls >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) break;
            header = true;
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            if (key == "dim")
                dim = std::stoi(value);
            else if (key == "name")
                name = value;
            else if (key == "embedding")
                embedding_spec = value;
            else
                throw config_error("domain file " + path.string() + ":" +
                                   std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        if (!header) break;
        if (embedding_spec == "poly") {
            std::string rest;
            // form: embedding=poly <ambient_dim>, polynomials on following lines
            std::istringstream again(line);
            std::string tok;
            while (again >> tok) {
                if (tok.rfind("embedding=", 0) == 0) {
                    again >> poly_ambient;
                    break;
                }
            }
            if (poly_ambient < 1)
                throw config_error("domain file: embedding=poly needs an ambient dimension");
            for (int k = 0; k < poly_ambient; ++k) {
                if (!std::getline(in, line))
                    throw config_error("domain file: missing polynomial line");
                ++lineno;
                poly_lines.push_back(line);
            }
        }
    }
    if (dim != 2)
        throw config_error("domain file " + path.string() + ": only dim=2 charts supported");
    if (name.empty()) throw config_error("domain file " + path.string() + ": missing name");

    std::vector<std::vector<Eigen::Vector2d>> rings;
    std::vector<Eigen::Vector2d> ring;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        std::istringstream ls(line);
        double x, y;
        if (ls >> x >> y) {
            ring.emplace_back(x, y);
        } else if (!ring.empty()) {
            rings.push_back(std::move(ring));
            ring.clear();
        }
    }
    if (!ring.empty()) rings.push_back(std::move(ring));
    if (rings.empty())
        throw config_error("domain file " + path.string() + ": no boundary rings");
    for (const auto& r : rings)
        if (r.size() < 4 || (r.front() - r.back()).norm() != 0.0)
            throw config_error("domain file " + path.string() +
                               ": rings must be closed (first vertex repeated last)");

    auto dom = std::make_shared<PolygonDomain>(PolygonBoundary(rings), name);
    if (!embedding_spec.empty() && embedding_spec != "poly") {
        if (embedding_spec == "swissroll") {
            dom->set_embedding(
                [](const ChartPoint& x) {
                    AmbientPoint p(3);
                    p << x[0] * std::cos(x[0]), x[0] * std::sin(x[0]), x[1];
                    return p;
                },
                3);
        } else {
            throw config_error("unknown embedding '" + embedding_spec + "'");
        }
    } else if (embedding_spec == "poly") {
        std::vector<std::function<double(const ChartPoint&)>> comps;
        for (const auto& p : poly_lines) comps.push_back(parse_polynomial(p, dim));
        dom->set_embedding(
            [comps](const ChartPoint& x) {
                AmbientPoint p(comps.size());
                for (std::size_t k = 0; k < comps.size(); ++k) p[k] = comps[k](x);
                return p;
            },
            poly_ambient);
    }
    return dom;
}

void save_domain_file(const fs::path& path, const PolygonBoundary& boundary,
                      const std::string& name) {
    std::ostringstream os;
    os << "dim=2 name=" << name << "\n\n";
    for (const auto& ring : boundary.rings()) {
        for (const auto& v : ring) os << format_g9(v.x()) << " " << format_g9(v.y()) << "\n";
        os << format_g9(ring.front().x()) << " " << format_g9(ring.front().y()) << "\n\n";
    }
    write_text_atomic(path, os.str());
}

// ---- ensemble cache ---------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'H', 'G', 'P', 'E'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw data_error("truncated ensemble cache file");
    return v;
}

}  // namespace

void write_ensemble(const fs::path& path, const PathEnsemble& e) {
    std::ostringstream os(std::ios::binary);
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, static_cast<std::uint32_t>(e.domain_name.size()));
    os.write(e.domain_name.data(), e.domain_name.size());
    put(os, static_cast<std::uint32_t>(e.dim));
    for (int k = 0; k < e.dim; ++k) put(os, e.start[k]);
    put(os, e.config.n_paths);
    put(os, static_cast<std::int32_t>(e.config.n_steps));
    put(os, e.config.dt);
    put(os, static_cast<std::int32_t>(e.config.max_rejections));
    put(os, e.config.seed);
    put(os, e.stream_id);
    const std::size_t bytes = e.positions.size() * sizeof(float);
    put(os, static_cast<std::uint64_t>(e.positions.size()));
    os.write(reinterpret_cast<const char*>(e.positions.data()), bytes);
    put(os, fnv1a(e.positions.data(), bytes));

    const std::string blob = os.str();
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw resource_error("cannot write cache file " + tmp.string());
        f.write(blob.data(), blob.size());
    }
    fs::rename(tmp, path);
}

PathEnsemble read_ensemble(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open ensemble cache " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw data_error("bad magic in " + path.string());
    if (take<std::uint32_t>(is) != kVersion)
        throw data_error("unsupported cache version in " + path.string());
    PathEnsemble e;
    const auto name_len = take<std::uint32_t>(is);
    e.domain_name.resize(name_len);
    is.read(e.domain_name.data(), name_len);
    e.dim = static_cast<int>(take<std::uint32_t>(is));
    if (e.dim < 1 || e.dim > 8) throw data_error("bad dimension in " + path.string());
    e.start.resize(e.dim);
    for (int k = 0; k < e.dim; ++k) e.start[k] = take<double>(is);
    e.config.n_paths = take<std::int64_t>(is);
    e.config.n_steps = take<std::int32_t>(is);
    e.config.dt = take<double>(is);
    e.config.max_rejections = take<std::int32_t>(is);
    e.config.seed = take<std::uint64_t>(is);
    e.stream_id = take<std::uint64_t>(is);
    const auto count = take<std::uint64_t>(is);
    if (count != static_cast<std::uint64_t>(e.config.n_paths) * e.config.n_steps * e.dim)
        throw data_error("inconsistent position count in " + path.string());
    e.positions.resize(count);
    is.read(reinterpret_cast<char*>(e.positions.data()), count * sizeof(float));
    if (!is) throw data_error("truncated positions in " + path.string());
    const auto checksum = take<std::uint64_t>(is);
    if (checksum != fnv1a(e.positions.data(), count * sizeof(float)))
        throw data_error("checksum mismatch in " + path.string() +
                         " (cache corrupted; delete and re-simulate)");
    return e;
}

std::string ensemble_cache_name(const std::string& domain_name, const SimConfig& cfg,
                                std::uint64_t stream_id) {
    std::uint64_t h = fnv1a(domain_name.data(), domain_name.size());
    h = fnv1a(&cfg.n_paths, sizeof(cfg.n_paths), h);
    h = fnv1a(&cfg.n_steps, sizeof(cfg.n_steps), h);
    h = fnv1a(&cfg.dt, sizeof(cfg.dt), h);
    h = fnv1a(&cfg.seed, sizeof(cfg.seed), h);
    h = fnv1a(&stream_id, sizeof(stream_id), h);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "ens_%016llx.bin", static_cast<unsigned long long>(h));
    return buf;
}

PathEnsemble cached_ensemble(const fs::path& cache_dir, const Domain& domain,
                             const ChartPoint& start, const SimConfig& cfg,
                             std::uint64_t stream_id, Exec exec) {
    if (cache_dir.empty()) return simulate_ensemble(domain, start, cfg, stream_id, exec);
    fs::create_directories(cache_dir);
    const fs::path file = cache_dir / ensemble_cache_name(domain.name(), cfg, stream_id);
    if (fs::exists(file)) {
        PathEnsemble e = read_ensemble(file);
        if (e.config == cfg && e.stream_id == stream_id &&
            (e.start - start).norm() <= 1e-12 && e.domain_name == domain.name())
            return e;
        // stale entry (hash collision or changed setup): re-simulate
    }
    PathEnsemble e = simulate_ensemble(domain, start, cfg, stream_id, exec);
    write_ensemble(file, e);
    return e;
}

// ---- observations ---------------------------------------------------------------------------

Dataset ingest(const fs::path& path, const Domain& domain, bool center) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open observation file " + path.string());
    const int d = domain.dim();
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw data_error(path.string() + ": empty file");
    ++lineno;

    std::vector<Eigen::VectorXd> pts;
    std::vector<double> ys;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (auto& c : line)
            if (c == ',' || c == ';' || c == '\t') c = ' ';
        std::istringstream ls(line);
        Eigen::VectorXd p(d);
        double value;
        for (int k = 0; k < d; ++k) {
            if (!(ls >> p[k]))
                throw data_error(path.string() + ":" + std::to_string(lineno) +
                                 ": expected " + std::to_string(d) + " coordinates");
        }
        if (!(ls >> value))
            throw data_error(path.string() + ":" + std::to_string(lineno) +
                             ": missing response value");
        if (!p.allFinite() || !std::isfinite(value))
            throw data_error(path.string() + ":" + std::to_string(lineno) +
                             ": non-finite entry");
        pts.push_back(std::move(p));
        ys.push_back(value);
    }
    if (pts.empty()) throw data_error(path.string() + ": no observations");

    Dataset ds;
    ds.points.resize(pts.size(), d);
    ds.y.resize(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ds.points.row(i) = pts[i].transpose();
        ds.y[static_cast<Eigen::Index>(i)] = ys[i];
    }
    if (center) {
        ds.center_offset = ds.points.colwise().mean().transpose();
        ds.points.rowwise() -= ds.center_offset.transpose();
    }

    std::vector<std::int64_t> bad;
    for (Eigen::Index i = 0; i < ds.points.rows(); ++i)
        if (!domain.inside(ds.points.row(i).transpose()))
            bad.push_back(i + 2);  // 1-based data row incl. header
    if (!bad.empty()) {
        std::ostringstream os;
        os << path.string() << ": " << bad.size()
           << " observation(s) outside domain '" << domain.name() << "' at line(s)";
        for (std::size_t i = 0; i < bad.size() && i < 12; ++i) os << " " << bad[i];
        if (bad.size() > 12) os << " ...";
        throw data_error(os.str());
    }
    return ds;
}

Eigen::MatrixXd read_points_file(const fs::path& path, int dim) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open points file " + path.string());
    std::vector<Eigen::VectorXd> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (auto& c : line)
            if (c == ',' || c == ';' || c == '\t') c = ' ';
        std::istringstream ls(line);
        Eigen::VectorXd p(dim);
        bool any = false;
        for (int k = 0; k < dim; ++k) {
            if (!(ls >> p[k])) {
                if (k == 0) break;  // blank-ish line
                throw data_error(path.string() + ":" + std::to_string(lineno) +
                                 ": expected " + std::to_string(dim) + " coordinates");
            }
            any = true;
        }
        if (any) pts.push_back(std::move(p));
    }
    if (pts.empty()) throw data_error(path.string() + ": no points");
    Eigen::MatrixXd out(pts.size(), dim);
    for (std::size_t i = 0; i < pts.size(); ++i) out.row(i) = pts[i].transpose();
    return out;
}

// ---- model files --------------------------------------------------------------------------------

void write_model_file(const fs::path& path, const ModelFile& m) {
    std::ostringstream os;
    os << "heatgp-model v1\n";
    os << "domain = " << m.domain_spec << "\n";
    os << "n_paths = " << m.sim.n_paths << "\n";
    os << "n_steps = " << m.sim.n_steps << "\n";
    os << "dt = " << format_g9(m.sim.dt) << "\n";
    os << "max_rejections = " << m.sim.max_rejections << "\n";
    os << "seed = " << m.sim.seed << "\n";
    os << "window_mode = "
       << (m.window.mode == WindowPolicy::Mode::Fixed ? "fixed" : "optimal") << "\n";
    os << "window_fixed_w = " << format_g9(m.window.fixed_w) << "\n";
    os << "window_pilot_fraction = " << format_g9(m.window.pilot_fraction) << "\n";
    os << "window_width_scale = " << format_g9(m.window.width_scale) << "\n";
    os << "t = " << format_g9(m.hp.t) << "\n";
    os << "sigma_h = " << format_g9(m.hp.sigma_h) << "\n";
    os << "sigma_noise = " << format_g9(m.hp.sigma_noise) << "\n";
    os << "cache_dir = " << m.cache_dir << "\n";
    os << "train " << m.train_points.rows() << " " << m.train_points.cols() << "\n";
    for (Eigen::Index i = 0; i < m.train_points.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.train_points.cols(); ++k)
            os << format_g9(m.train_points(i, k)) << " ";
        os << format_g9(m.y[i]) << "\n";
    }
    if (m.inducing_points) {
        os << "inducing " << m.inducing_points->rows() << " " << m.inducing_points->cols()
           << "\n";
        for (Eigen::Index i = 0; i < m.inducing_points->rows(); ++i) {
            for (Eigen::Index k = 0; k < m.inducing_points->cols(); ++k)
                os << format_g9((*m.inducing_points)(i, k))
                   << (k + 1 < m.inducing_points->cols() ? " " : "");
            os << "\n";
        }
    }
    write_text_atomic(path, os.str());
}

ModelFile read_model_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open model file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "heatgp-model v1")
        throw config_error(path.string() + ": not a heatgp model file");
    ModelFile m;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line.rfind("train ", 0) == 0) {
            std::istringstream ls(line.substr(6));
            Eigen::Index n, d;
            if (!(ls >> n >> d)) throw config_error(path.string() + ": bad train header");
            m.train_points.resize(n, d);
            m.y.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::getline(in, line))
                    throw config_error(path.string() + ": truncated train block");
                std::istringstream row(line);
                for (Eigen::Index k = 0; k < d; ++k) row >> m.train_points(i, k);
                if (!(row >> m.y[i]))
                    throw config_error(path.string() + ": bad train row");
            }
        } else if (line.rfind("inducing ", 0) == 0) {
            std::istringstream ls(line.substr(9));
            Eigen::Index mm, d;
            if (!(ls >> mm >> d)) throw config_error(path.string() + ": bad inducing header");
            Eigen::MatrixXd z(mm, d);
            for (Eigen::Index i = 0; i < mm; ++i) {
                if (!std::getline(in, line))
                    throw config_error(path.string() + ": truncated inducing block");
                std::istringstream row(line);
                for (Eigen::Index k = 0; k < d; ++k)
                    if (!(row >> z(i, k)))
                        throw config_error(path.string() + ": bad inducing row");
            }
            m.inducing_points = std::move(z);
        } else {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 1);
            auto trim = [](std::string& s) {
                while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                    s.erase(s.begin());
                while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
                    s.pop_back();
            };
            trim(key);
            trim(value);
            kv[key] = value;
        }
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end())
            throw config_error(path.string() + ": missing key '" + key + "'");
        return it->second;
    };
    m.domain_spec = need("domain");
    m.sim.n_paths = std::stoll(need("n_paths"));
    m.sim.n_steps = std::stoi(need("n_steps"));
    m.sim.dt = std::stod(need("dt"));
    m.sim.max_rejections = std::stoi(need("max_rejections"));
    m.sim.seed = std::stoull(need("seed"));
    m.window.mode = need("window_mode") == "fixed" ? WindowPolicy::Mode::Fixed
                                                   : WindowPolicy::Mode::Optimal;
    m.window.fixed_w = std::stod(need("window_fixed_w"));
    m.window.pilot_fraction = std::stod(need("window_pilot_fraction"));
    m.window.width_scale = kv.count("window_width_scale") ? std::stod(kv["window_width_scale"]) : 1.5;
    m.hp.t = std::stod(need("t"));
    m.hp.sigma_h = std::stod(need("sigma_h"));
    m.hp.sigma_noise = std::stod(need("sigma_noise"));
    m.cache_dir = kv.count("cache_dir") ? kv["cache_dir"] : "";
    if (m.train_points.rows() == 0) throw config_error(path.string() + ": no training block");
    return m;
}

// ---- text output -------------------------------------------------------------------------------

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw resource_error("cannot write " + tmp.string());
        f.write(content.data(), content.size());
        if (!f) throw resource_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_ppm_heatmap(const fs::path& path, const Eigen::MatrixXd& values, double lo,
                       double hi) {
    const auto rows = values.rows(), cols = values.cols();
    std::ostringstream os;
    os << "P6\n" << cols << " " << rows << "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = values(r, c);
            unsigned char rgb[3];
            if (!std::isfinite(v)) {
                rgb[0] = rgb[1] = rgb[2] = 128;  // masked
            } else {
                // blue (lo) -> white (mid) -> red (hi)
                const double u = std::clamp((v - lo) / span, 0.0, 1.0);
                if (u < 0.5) {
                    const double w = u / 0.5;
                    rgb[0] = static_cast<unsigned char>(255 * w);
                    rgb[1] = static_cast<unsigned char>(255 * w);
                    rgb[2] = 255;
                } else {
                    const double w = (u - 0.5) / 0.5;
                    rgb[0] = 255;
                    rgb[1] = static_cast<unsigned char>(255 * (1.0 - w));
                    rgb[2] = static_cast<unsigned char>(255 * (1.0 - w));
                }
            }
            os.write(reinterpret_cast<const char*>(rgb), 3);
        }
    }
    write_text_atomic(path, os.str());
}

// ---- run configs ----------------------------------------------------------------------------------

std::string RunConfig::get(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw config_error("missing config key '" + key + "'");
    return it->second;
}

std::string RunConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

double RunConfig::num(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::invalid_argument&) {
        throw config_error("config key '" + key + "' is not a number");
    }
}

double RunConfig::num_or(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
}

std::int64_t RunConfig::int_or(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    try {
        return std::stoll(get(key));
    } catch (const std::invalid_argument&) {
        throw config_error("config key '" + key + "' is not an integer");
    }
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path.string());
    RunConfig cfg;
    cfg.kv["__dir"] = path.has_parent_path() ? path.parent_path().string() : ".";
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key = value");
        auto trim = [](std::string s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
                s.pop_back();
            return s;
        };
        cfg.kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

}  // namespace heatgp
