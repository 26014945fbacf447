#pragma once

#include <array>
#include <cstdint>

namespace heatgp {

// Philox 4x32-10 counter-based generator. Stateless: every 128-bit counter
// maps to 128 independent output bits under a 64-bit key, so any (path, step,
// attempt) coordinate can be evaluated out of order. This is what makes the
// simulation reproducible independent of scheduling and worker count.
struct Philox4x32 {
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key);
};

std::uint64_t splitmix64(std::uint64_t x);

// One logical stream of unit normals, keyed by (master seed, stream id).
// Streams for distinct ids are independent; values are addressed by
// (path, step, attempt) so rejection resampling never perturbs later draws.
class NormalStream {
public:
    NormalStream() = default;
    NormalStream(std::uint64_t master_seed, std::uint64_t stream_id);

    // Writes d iid N(0,1) variates for the given coordinate.
    void normals(std::uint32_t path, std::uint32_t step, std::uint32_t attempt,
                 int d, double* out) const;

    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::array<std::uint32_t, 2> key_{0, 0};
    std::uint64_t stream_id_ = 0;
};

// Derives per-ensemble stream ids. Roles keep training / test / inducing
// simulations on disjoint streams even when indices collide.
enum class StreamRole : std::uint64_t { Train = 0, Test = 1, Inducing = 2, Aux = 3 };

inline std::uint64_t make_stream_id(StreamRole role, std::uint64_t index) {
    return (static_cast<std::uint64_t>(role) << 56) | (index & ((1ull << 56) - 1));
}

}  // namespace heatgp
