#include "heatgp/rng.hpp"

#include <cmath>

namespace heatgp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline double to_unit_open(std::uint64_t bits) {
    // 53-bit mantissa, shifted into (0, 1].
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

inline double to_unit_halfopen(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const std::array<std::uint32_t, 4> next{
            static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
            static_cast<std::uint32_t>(p0),
        };
        ctr = next;
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

NormalStream::NormalStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : stream_id_(stream_id) {
    const std::uint64_t k = splitmix64(splitmix64(master_seed) ^ stream_id);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

void NormalStream::normals(std::uint32_t path, std::uint32_t step,
                           std::uint32_t attempt, int d, double* out) const {
    const int blocks = (d + 1) / 2;
    for (int b = 0; b < blocks; ++b) {
        const auto r = Philox4x32::block(
            {path, step, attempt, static_cast<std::uint32_t>(b)}, key_);
        const std::uint64_t bits_a =
            (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t bits_b =
            (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        // Box-Muller; u1 in (0,1] keeps the log finite.
        const double radius = std::sqrt(-2.0 * std::log(to_unit_open(bits_a)));
        const double angle = 6.283185307179586476925286766559 * to_unit_halfopen(bits_b);
        out[2 * b] = radius * std::cos(angle);
        if (2 * b + 1 < d) out[2 * b + 1] = radius * std::sin(angle);
    }
}

}  // namespace heatgp
