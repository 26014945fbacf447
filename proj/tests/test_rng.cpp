#include <doctest.h>

#include <cmath>
#include <vector>

#include "heatgp/rng.hpp"

using namespace heatgp;

// Known-answer vectors for philox4x32-10 from the Random123 test suite.
TEST_CASE("philox4x32-10 known answers") {
    auto r = Philox4x32::block({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(r[0] == 0x6627e8d5u);
    CHECK(r[1] == 0xe169c58du);
    CHECK(r[2] == 0xbc57ac4cu);
    CHECK(r[3] == 0x9b00dbd8u);

    r = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu});
    CHECK(r[0] == 0x408f276du);
    CHECK(r[1] == 0x41c83b0eu);
    CHECK(r[2] == 0xa20bc7c6u);
    CHECK(r[3] == 0x6d5451fdu);

    r = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u});
    CHECK(r[0] == 0xd16cfe09u);
    CHECK(r[1] == 0x94fdccebu);
    CHECK(r[2] == 0x5001e420u);
    CHECK(r[3] == 0x24126ea1u);
}

TEST_CASE("normal stream is stateless and order independent") {
    const NormalStream s(12345, make_stream_id(StreamRole::Train, 3));
    double a[2], b[2];
    s.normals(7, 11, 2, 2, a);
    s.normals(100, 0, 0, 2, b);  // interleave another coordinate
    double a2[2];
    s.normals(7, 11, 2, 2, a2);
    CHECK(a[0] == a2[0]);
    CHECK(a[1] == a2[1]);

    // distinct coordinates and streams decorrelate
    const NormalStream other(12345, make_stream_id(StreamRole::Train, 4));
    double c[2];
    other.normals(7, 11, 2, 2, c);
    CHECK(a[0] != c[0]);
    CHECK(a[0] != b[0]);
}

TEST_CASE("normal stream moments") {
    const NormalStream s(99, make_stream_id(StreamRole::Aux, 0));
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    double z[2];
    for (int i = 0; i < n / 2; ++i) {
        s.normals(static_cast<std::uint32_t>(i), 0, 0, 2, z);
        sum += z[0] + z[1];
        sum2 += z[0] * z[0] + z[1] * z[1];
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
