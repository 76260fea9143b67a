#include <doctest.h>

#include <cmath>
#include <set>

#include "fkpf/rng.hpp"

using namespace fkpf;

TEST_SUITE("rng") {

TEST_CASE("philox4x32-10 known answers") {
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
    PathStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
    bool differ_c = false, differ_d = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u32();
        CHECK(x == b.next_u32());
        differ_c |= x != c.next_u32();
        differ_d |= x != d.next_u32();
    }
    CHECK(differ_c);
    CHECK(differ_d);
}

TEST_CASE("uniform lies in the open unit interval with the right moments") {
    PathStream s(1, 0);
    double m = 0.0, m2 = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        const double u = s.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        m += u;
        m2 += u * u;
    }
    m /= N;
    m2 /= N;
    CHECK(std::abs(m - 0.5) < 4 * std::sqrt(1.0 / 12 / N));
    CHECK(std::abs(m2 - m * m - 1.0 / 12) < 1e-3);
}

TEST_CASE("normal variates have unit variance and small skew") {
    PathStream s(99, 12345);
    const int N = 200000;
    double m = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double z = s.normal();
        m += z;
        m2 += z * z;
        m3 += z * z * z;
        m4 += z * z * z * z;
    }
    m /= N;
    m2 /= N;
    m3 /= N;
    m4 /= N;
    CHECK(std::abs(m) < 4 / std::sqrt(N));
    CHECK(std::abs(m2 - 1.0) < 0.015);
    CHECK(std::abs(m3) < 0.03);
    CHECK(std::abs(m4 - 3.0) < 0.08);
}

TEST_CASE("no repeated outputs across neighbouring streams") {
    std::set<std::uint32_t> seen;
    for (std::uint64_t id = 0; id < 64; ++id) {
        PathStream s(5, id);
        for (int i = 0; i < 16; ++i) seen.insert(s.next_u32());
    }
    CHECK(seen.size() > 64 * 16 - 2);
}

}
