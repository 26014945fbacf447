#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "heatgp/errors.hpp"
#include "heatgp/io.hpp"

using namespace heatgp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("heatgp_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter;
};
int TempDir::counter = 0;

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

}  // namespace

TEST_CASE("run config parsing") {
    TempDir tmp;
    write_file(tmp.path / "run.cfg",
               "# comment\n"
               "domain = ushape\n"
               "n_paths = 5000   # trailing comment\n"
               "dt=0.25\n"
               "\n");
    const RunConfig cfg = load_run_config(tmp.path / "run.cfg");
    CHECK(cfg.get("domain") == "ushape");
    CHECK(cfg.int_or("n_paths", 0) == 5000);
    CHECK(cfg.num("dt") == 0.25);
    CHECK(cfg.get_or("missing", "x") == "x");
    CHECK_THROWS_AS(cfg.get("missing"), config_error);

    write_file(tmp.path / "bad.cfg", "this line has no equals\n");
    CHECK_THROWS_AS(load_run_config(tmp.path / "bad.cfg"), config_error);
}

TEST_CASE("polynomial parser") {
    const auto f = parse_polynomial("0.5*x1^2 - x2 + 1", 2);
    ChartPoint p(2);
    p << 3.0, 2.0;
    CHECK(f(p) == doctest::Approx(0.5 * 9.0 - 2.0 + 1.0));
    const auto g = parse_polynomial("x1*x2", 2);
    CHECK(g(p) == doctest::Approx(6.0));
    const auto h = parse_polynomial("-2*x1 + 3", 1);
    ChartPoint q(1);
    q << 4.0;
    CHECK(h(q) == doctest::Approx(-5.0));
    CHECK_THROWS_AS(parse_polynomial("x3", 2), config_error);
    CHECK_THROWS_AS(parse_polynomial("1 +", 2), config_error);
    CHECK_THROWS_AS(parse_polynomial("", 2), config_error);
}

TEST_CASE("domain file round trip") {
    TempDir tmp;
    std::vector<Eigen::Vector2d> square = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
    const PolygonBoundary boundary({square});
    save_domain_file(tmp.path / "dom.txt", boundary, "square");
    const DomainPtr dom = load_domain_file(tmp.path / "dom.txt");
    CHECK(dom->name() == "square");
    CHECK(dom->dim() == 2);
    ChartPoint in(2), out(2);
    in << 1.0, 1.0;
    out << 3.0, 1.0;
    CHECK(dom->inside(in));
    CHECK(!dom->inside(out));
    CHECK(dom->flat());
}

TEST_CASE("domain file with a polynomial embedding") {
    TempDir tmp;
    write_file(tmp.path / "bowl.txt",
               "dim=2 name=bowl embedding=poly 3\n"
               "x1\n"
               "x2\n"
               "0.5*x1^2 + 0.5*x2^2\n"
               "\n"
               "-2 -2\n"
               "2 -2\n"
               "2 2\n"
               "-2 2\n"
               "-2 -2\n");
    const DomainPtr dom = load_domain_file(tmp.path / "bowl.txt");
    REQUIRE(dom->has_embedding());
    ChartPoint p(2);
    p << 1.0, 0.5;
    const AmbientPoint a = dom->embed(p);
    CHECK(a[2] == doctest::Approx(0.5 + 0.125));
    // induced metric g = I + grad f grad f^T for a graph embedding
    const Eigen::MatrixXd g = dom->metric(p);
    CHECK(g(0, 0) == doctest::Approx(1.0 + 1.0 * 1.0).epsilon(1e-6));
    CHECK(g(0, 1) == doctest::Approx(1.0 * 0.5).epsilon(1e-6));
    CHECK(g(1, 1) == doctest::Approx(1.0 + 0.25).epsilon(1e-6));
    CHECK(!dom->flat());
}

TEST_CASE("ensemble cache round trip and corruption detection") {
    TempDir tmp;
    const auto dom = make_euclidean(2);
    SimConfig cfg;
    cfg.n_paths = 500;
    cfg.n_steps = 12;
    cfg.dt = 0.1;
    cfg.seed = 99;
    ChartPoint start(2);
    start << 0.5, -0.25;
    const PathEnsemble e = simulate_ensemble(*dom, start, cfg, 42);
    const fs::path file = tmp.path / "e.bin";
    write_ensemble(file, e);
    const PathEnsemble back = read_ensemble(file);
    CHECK(back.config == e.config);
    CHECK(back.stream_id == 42);
    CHECK(back.domain_name == e.domain_name);
    CHECK(back.positions == e.positions);
    CHECK((back.start - start).norm() == 0.0);

    // flip one payload byte: checksum must catch it
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    char c;
    f.seekg(200);
    f.get(c);
    f.seekp(200);
    f.put(static_cast<char>(c ^ 0x01));
    f.close();
    CHECK_THROWS_AS(read_ensemble(file), data_error);
}

TEST_CASE("cached_ensemble reuses files and falls back to simulation") {
    TempDir tmp;
    const auto dom = make_euclidean(1);
    SimConfig cfg;
    cfg.n_paths = 300;
    cfg.n_steps = 5;
    cfg.dt = 0.2;
    cfg.seed = 7;
    ChartPoint start(1);
    start << 0.0;
    const PathEnsemble fresh = cached_ensemble(tmp.path, *dom, start, cfg, 3);
    CHECK(fs::exists(tmp.path / ensemble_cache_name(dom->name(), cfg, 3)));
    const PathEnsemble reused = cached_ensemble(tmp.path, *dom, start, cfg, 3);
    CHECK(fresh.positions == reused.positions);
    // no cache dir: simulate directly, same bits
    const PathEnsemble direct = cached_ensemble("", *dom, start, cfg, 3);
    CHECK(direct.positions == fresh.positions);
}

TEST_CASE("ingest parses, validates and centers") {
    TempDir tmp;
    const auto dom = make_euclidean(2);
    write_file(tmp.path / "obs.csv",
               "x,y,value\n"
               "1.0, 2.0, 0.5\n"
               "3.0, 4.0, -1.5\n"
               "5.0, 6.0, 2.5\n");
    const Dataset ds = ingest(tmp.path / "obs.csv", *dom);
    REQUIRE(ds.n() == 3);
    CHECK(ds.points(1, 1) == 4.0);
    CHECK(ds.y[2] == 2.5);

    const Dataset centered = ingest(tmp.path / "obs.csv", *dom, true);
    CHECK(std::abs(centered.points.col(0).mean()) < 1e-12);
    CHECK(std::abs(centered.points.col(1).mean()) < 1e-12);
    CHECK(centered.center_offset[0] == doctest::Approx(3.0));

    write_file(tmp.path / "short.csv", "x,y,value\n1.0 2.0\n");
    CHECK_THROWS_AS(ingest(tmp.path / "short.csv", *dom), data_error);
    try {
        ingest(tmp.path / "short.csv", *dom);
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }

    // a point in the u-shape gap is rejected with its row number
    const auto ushape = make_ushape();
    write_file(tmp.path / "gap.csv",
               "x,y,value\n"
               "2.0,-1.0,1.0\n"
               "2.0,0.0,2.0\n");
    CHECK_THROWS_AS(ingest(tmp.path / "gap.csv", *ushape), data_error);
    try {
        ingest(tmp.path / "gap.csv", *ushape);
    } catch (const data_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("outside domain") != std::string::npos);
        CHECK(msg.find("3") != std::string::npos);
    }
}

TEST_CASE("model file round trip") {
    TempDir tmp;
    ModelFile m;
    m.domain_spec = "ushape";
    m.sim.n_paths = 12345;
    m.sim.n_steps = 50;
    m.sim.dt = 0.12;
    m.sim.seed = 777;
    m.window.mode = WindowPolicy::Mode::Fixed;
    m.window.fixed_w = 0.3;
    m.window.pilot_fraction = 0.2;
    m.hp = Hyperparams{1.2, 2.5, 0.07};
    m.train_points.resize(2, 2);
    m.train_points << 1.0, -1.0, 2.0, 1.0;
    m.y.resize(2);
    m.y << 0.25, -0.75;
    m.cache_dir = (tmp.path / "cache").string();

    write_model_file(tmp.path / "model.txt", m);
    const ModelFile back = read_model_file(tmp.path / "model.txt");
    CHECK(back.domain_spec == "ushape");
    CHECK(back.sim == m.sim);
    CHECK(back.window.mode == WindowPolicy::Mode::Fixed);
    CHECK(back.window.fixed_w == 0.3);
    CHECK(back.hp.t == 1.2);
    CHECK(back.hp.sigma_h == 2.5);
    CHECK((back.train_points - m.train_points).norm() == 0.0);
    CHECK((back.y - m.y).norm() == 0.0);
    CHECK(!back.sparse());

    m.inducing_points = Eigen::MatrixXd::Zero(3, 2);
    (*m.inducing_points)(1, 0) = 4.5;
    write_model_file(tmp.path / "sparse.txt", m);
    const ModelFile sparse = read_model_file(tmp.path / "sparse.txt");
    REQUIRE(sparse.sparse());
    CHECK((*sparse.inducing_points)(1, 0) == 4.5);
}

TEST_CASE("points file") {
    TempDir tmp;
    write_file(tmp.path / "pts.txt", "# targets\n0.5, 0.5\n1.5 2.5\n");
    const Eigen::MatrixXd pts = read_points_file(tmp.path / "pts.txt", 2);
    REQUIRE(pts.rows() == 2);
    CHECK(pts(1, 1) == 2.5);
}

TEST_CASE("nine significant digit formatting") {
    CHECK(format_g9(0.1) == "0.1");
    CHECK(format_g9(1.0 / 3.0) == "0.333333333");
    CHECK(format_g9(12345678912.0) == "1.23456789e+10");
}

TEST_CASE("ppm heatmap writer") {
    TempDir tmp;
    Eigen::MatrixXd img(2, 3);
    img << 0.0, 0.5, 1.0, std::numeric_limits<double>::quiet_NaN(), 0.25, 0.75;
    write_ppm_heatmap(tmp.path / "img.ppm", img, 0.0, 1.0);
    std::ifstream f(tmp.path / "img.ppm", std::ios::binary);
    std::string header;
    std::getline(f, header);
    CHECK(header == "P6");
    int w, h, maxval;
    f >> w >> h >> maxval;
    CHECK(w == 3);
    CHECK(h == 2);
    CHECK(maxval == 255);
    f.get();  // single whitespace after header
    std::vector<unsigned char> px(2 * 3 * 3);
    f.read(reinterpret_cast<char*>(px.data()), px.size());
    CHECK(f.gcount() == static_cast<std::streamsize>(px.size()));
    // first pixel is the low end of the ramp (blue)
    CHECK(px[0] == 0);
    CHECK(px[2] == 255);
    // NaN renders gray
    CHECK(px[9] == 128);
    CHECK(px[10] == 128);
    CHECK(px[11] == 128);
}

TEST_CASE("atomic writes leave no temp file") {
    TempDir tmp;
    write_text_atomic(tmp.path / "out.txt", "hello\n");
    CHECK(fs::exists(tmp.path / "out.txt"));
    CHECK(!fs::exists(tmp.path / "out.txt.tmp"));
}
