#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "heatgp/io.hpp"

namespace fs = std::filesystem;
using namespace heatgp;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("heatgp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter;
};
int TempDir::counter = 0;

int run_cli(const std::string& args, const fs::path& workdir, std::string* output = nullptr) {
    const fs::path out_file = workdir / "cli_output.txt";
    const std::string cmd = "cd " + workdir.string() + " && " + HEATGP_CLI_PATH + " " + args +
                            " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) {
        std::ifstream f(out_file);
        std::stringstream ss;
        ss << f.rdbuf();
        *output = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

// small deterministic dataset on the u-shape
void write_ushape_fixture(const fs::path& dir) {
    write_file(dir / "obs.csv",
               "x,y,value\n"
               "3.0,-1.0,-5.2\n"
               "2.0,-1.2,-3.9\n"
               "1.0,-0.8,-2.4\n"
               "-0.5,0.0,0.1\n"
               "1.0,0.9,2.3\n"
               "2.0,1.1,4.1\n"
               "3.0,1.0,5.4\n");
    write_file(dir / "run.cfg",
               "domain = ushape\n"
               "data = obs.csv\n"
               "n_paths = 3000\n"
               "n_steps = 25\n"
               "dt = 0.2\n"
               "seed = 11\n"
               "cache_dir = cache\n");
}

}  // namespace

TEST_CASE("help exits cleanly") {
    TempDir tmp;
    std::string out;
    CHECK(run_cli("--help", tmp.path, &out) == 0);
    CHECK(out.find("kernel-validate") != std::string::npos);
}

TEST_CASE("kernel-validate writes a csv and reports medians") {
    TempDir tmp;
    std::string out;
    const int rc = run_cli(
        "kernel-validate --n-paths 2000 --grid-n 20 --seed 5 --out kv.csv", tmp.path, &out);
    CHECK(rc == 0);
    CHECK(out.find("median_rel_err") != std::string::npos);
    const std::string csv = slurp(tmp.path / "kv.csv");
    CHECK(csv.rfind("s,t,K_true,K_hat,stderr,rel_err", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
}

TEST_CASE("fit and predict round trip on the u-shape") {
    TempDir tmp;
    write_ushape_fixture(tmp.path);
    std::string out;
    REQUIRE(run_cli("fit --config run.cfg --out-dir out", tmp.path, &out) == 0);
    CHECK(fs::exists(tmp.path / "out/model.txt"));
    CHECK(fs::exists(tmp.path / "out/report.txt"));
    const std::string report = slurp(tmp.path / "out/report.txt");
    CHECK(report.find("chosen_t") != std::string::npos);
    CHECK(report.find("unimodal_in_t") != std::string::npos);

    // deterministic rerun: byte-identical model
    const std::string model_bytes = slurp(tmp.path / "out/model.txt");
    REQUIRE(run_cli("fit --config run.cfg --out-dir out2", tmp.path, &out) == 0);
    CHECK(slurp(tmp.path / "out2/model.txt") == model_bytes);

    // prediction over a grid, masked gap points flagged rather than predicted
    REQUIRE(run_cli("predict --model out/model.txt --grid 80 --out pred.csv --raster "
                    "pred.ppm",
                    tmp.path, &out) == 0);
    const std::string csv = slurp(tmp.path / "pred.csv");
    CHECK(csv.rfind("x1,x2,inside,mean", 0) == 0);
    CHECK(csv.find(",0,\n") != std::string::npos);  // masked row with empty mean
    const std::string rerun_before = csv;
    CHECK(slurp(tmp.path / "pred.ppm").rfind("P6", 0) == 0);

    // byte-identical prediction rerun (cache path)
    REQUIRE(run_cli("predict --model out/model.txt --grid 80 --out pred2.csv", tmp.path,
                    &out) == 0);
    CHECK(slurp(tmp.path / "pred2.csv") == rerun_before);

    // dense variance without test ensembles is an actionable config error
    CHECK(run_cli("predict --model out/model.txt --grid 20 --variance --out v.csv",
                  tmp.path, &out) == 2);
    CHECK(out.find("--simulate-test-ensembles") != std::string::npos);

    // with test-point simulation the variance column appears
    REQUIRE(run_cli("predict --model out/model.txt --grid 20 --variance "
                    "--simulate-test-ensembles --out v.csv",
                    tmp.path, &out) == 0);
    CHECK(slurp(tmp.path / "v.csv").rfind("x1,x2,inside,mean,variance", 0) == 0);

    // cache inspection
    REQUIRE(run_cli("cache list --cache-dir cache", tmp.path, &out) == 0);
    CHECK(out.find("files") != std::string::npos);
    REQUIRE(run_cli("cache clear --cache-dir cache", tmp.path, &out) == 0);
    CHECK(out.find("removed") != std::string::npos);
}

TEST_CASE("cached and fresh ensembles give identical predictions") {
    TempDir tmp;
    write_ushape_fixture(tmp.path);
    std::string out;
    // warm the cache explicitly, then fit from it
    REQUIRE(run_cli("simulate --config run.cfg", tmp.path, &out) == 0);
    CHECK(out.find("cached 7 ensembles") != std::string::npos);
    REQUIRE(run_cli("fit --config run.cfg --out-dir warm", tmp.path, &out) == 0);
    // cold run without any cache
    write_file(tmp.path / "nocache.cfg", slurp(tmp.path / "run.cfg") + "\n");
    std::string cfg_text = slurp(tmp.path / "run.cfg");
    cfg_text.replace(cfg_text.find("cache_dir = cache"), 17, "cache_dir = cache2");
    write_file(tmp.path / "cold.cfg", cfg_text);
    REQUIRE(run_cli("fit --config cold.cfg --out-dir cold", tmp.path, &out) == 0);
    std::string warm_model = slurp(tmp.path / "warm/model.txt");
    std::string cold_model = slurp(tmp.path / "cold/model.txt");
    // models differ only in the cache_dir line
    const auto strip = [](std::string s) {
        std::istringstream is(s);
        std::ostringstream os;
        std::string line;
        while (std::getline(is, line))
            if (line.rfind("cache_dir", 0) != 0) os << line << "\n";
        return os.str();
    };
    CHECK(strip(warm_model) == strip(cold_model));
}

TEST_CASE("error paths return the documented exit codes") {
    TempDir tmp;
    std::string out;
    CHECK(run_cli("fit --config missing.cfg", tmp.path, &out) == 2);

    write_ushape_fixture(tmp.path);
    // out-of-domain observation -> data error (3)
    write_file(tmp.path / "bad_obs.csv",
               "x,y,value\n"
               "2.0,-1.0,1.0\n"
               "2.0,0.0,2.0\n");
    CHECK(run_cli("fit --config run.cfg --data bad_obs.csv", tmp.path, &out) == 3);
    CHECK(out.find("outside domain") != std::string::npos);

    // config without a seed -> config error (2)
    write_file(tmp.path / "noseed.cfg",
               "domain = ushape\ndata = obs.csv\nn_paths = 100\nn_steps = 2\ndt = 0.2\n");
    CHECK(run_cli("fit --config noseed.cfg", tmp.path, &out) == 2);
    CHECK(out.find("seed") != std::string::npos);
}

TEST_CASE("benchmark smoke run emits the table csv") {
    TempDir tmp;
    std::string out;
    const int rc = run_cli(
        "benchmark --spec ushape --replicates 1 --n-paths 1500 --n-steps 20 --dt 0.25 "
        "--seed 3 --out bench.csv",
        tmp.path, &out);
    REQUIRE(rc == 0);
    const std::string csv = slurp(tmp.path / "bench.csv");
    CHECK(csv.rfind("method,mean_rms,sd_rms", 0) == 0);
    CHECK(csv.find("in-gp") != std::string::npos);
    CHECK(csv.find("normal-gp") != std::string::npos);
}
