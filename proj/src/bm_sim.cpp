#include "heatgp/bm_sim.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "heatgp/errors.hpp"

namespace heatgp {

DriftVector drift_at(const Domain& domain, const ChartPoint& x) {
    const int d = domain.dim();
    if (domain.flat()) return Eigen::VectorXd::Zero(d);
    const MetricTensor m = metric_at(domain, x);
    const auto jac = metric_jacobian_at(domain, x);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) {
        const Eigen::MatrixXd term = -m.inv_g * jac[j] * m.inv_g;
        const double tr = (m.inv_g * jac[j]).trace();
        for (int i = 0; i < d; ++i) mu[i] += term(i, j) + 0.5 * m.inv_g(i, j) * tr;
    }
    return mu;
}

ChartPoint propose_step(const Domain& domain, const ChartPoint& x, double dt,
                        const Eigen::VectorXd& noise) {
    if (domain.flat()) return x + std::sqrt(dt) * noise;
    const MetricTensor m = metric_at(domain, x);
    return x + drift_at(domain, x) * dt + std::sqrt(dt) * (m.sqrt_inv_g * noise);
}

namespace {

// Hot-loop stepper: closed forms for the flat and swiss-roll cases, generic
// metric algebra otherwise. The swiss-roll branch is checked against the
// generic route in the tests.
class StepKernel {
public:
    explicit StepKernel(const Domain& domain) : domain_(domain) {
        if (domain.flat())
            kind_ = Kind::Flat;
        else if (dynamic_cast<const SwissRollDomain*>(&domain))
            kind_ = Kind::SwissRoll;
        else
            kind_ = Kind::General;
    }

    void propose(const double* x, double dt, const double* z, double* out) const {
        const double sq = std::sqrt(dt);
        switch (kind_) {
            case Kind::Flat: {
                const int d = domain_.dim();
                for (int k = 0; k < d; ++k) out[k] = x[k] + sq * z[k];
                return;
            }
            case Kind::SwissRoll: {
                const double r = x[0];
                const double u = 1.0 + r * r;
                out[0] = r - r / (u * u) * dt + sq * z[0] / std::sqrt(u);
                out[1] = x[1] + sq * z[1];
                return;
            }
            case Kind::General: {
                const int d = domain_.dim();
                Eigen::Map<const Eigen::VectorXd> xv(x, d);
                Eigen::VectorXd zn(d);
                for (int k = 0; k < d; ++k) zn[k] = z[k];
                const ChartPoint next = propose_step(domain_, xv, dt, zn);
                for (int k = 0; k < d; ++k) out[k] = next[k];
                return;
            }
        }
    }

private:
    enum class Kind { Flat, SwissRoll, General };
    const Domain& domain_;
    Kind kind_;
};

struct StuckRecord {
    std::int64_t path = -1;
    int step = 0;
    ChartPoint at;
};

}  // namespace

PathEnsemble simulate_ensemble(const Domain& domain, const ChartPoint& start,
                               const SimConfig& cfg, std::uint64_t stream_id, Exec exec) {
    const int d = domain.dim();
    if (start.size() != d) throw config_error("start point dimension mismatch");
    if (!domain.inside(start))
        throw config_error("start point is not interior to domain '" + domain.name() + "'");
    if (cfg.n_paths < 1 || cfg.n_steps < 1 || cfg.dt <= 0.0 || cfg.max_rejections < 1)
        throw config_error("SimConfig fields must be positive");
    if (d > 8) throw config_error("chart dimension > 8 not supported by the simulator");

    PathEnsemble e;
    e.start = start;
    e.config = cfg;
    e.dim = d;
    e.stream_id = stream_id;
    e.domain_name = domain.name();
    e.positions.resize(static_cast<std::size_t>(cfg.n_paths) * cfg.n_steps * d);

    const NormalStream stream(cfg.seed, stream_id);
    const StepKernel kernel(domain);

    std::atomic<bool> stuck{false};
    StuckRecord first_stuck;

    auto run_path = [&](std::int64_t j) {
        double x[8], cand[8], z[8];
        for (int k = 0; k < d; ++k) x[k] = start[k];
        for (int l = 0; l < cfg.n_steps; ++l) {
            bool accepted = false;
            for (int a = 0; a < cfg.max_rejections; ++a) {
                stream.normals(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(l),
                               static_cast<std::uint32_t>(a), d, z);
                kernel.propose(x, cfg.dt, z, cand);
                Eigen::Map<const Eigen::VectorXd> cv(cand, d);
                if (domain.inside(cv)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                bool expected = false;
                if (stuck.compare_exchange_strong(expected, true)) {
                    first_stuck.path = j;
                    first_stuck.step = l + 1;
                    first_stuck.at = Eigen::Map<const Eigen::VectorXd>(x, d);
                }
                return;
            }
            float* slot =
                e.positions.data() + (static_cast<std::size_t>(l) * cfg.n_paths + j) * d;
            for (int k = 0; k < d; ++k) {
                x[k] = cand[k];
                slot[k] = static_cast<float>(cand[k]);
            }
        }
    };

    if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
        for (std::int64_t j = 0; j < cfg.n_paths; ++j) {
            if (!stuck.load(std::memory_order_relaxed)) run_path(j);
        }
    } else {
        for (std::int64_t j = 0; j < cfg.n_paths; ++j) {
            if (stuck.load(std::memory_order_relaxed)) break;
            run_path(j);
        }
    }

    if (stuck.load()) {
        std::ostringstream os;
        os << "path " << first_stuck.path << " stuck at step " << first_stuck.step
           << " near (";
        for (int k = 0; k < d; ++k) os << (k ? ", " : "") << first_stuck.at[k];
        os << ") after " << cfg.max_rejections
           << " rejections; boundary sliver too narrow for dt=" << cfg.dt;
        throw resource_error(os.str());
    }
    return e;
}

}  // namespace heatgp
