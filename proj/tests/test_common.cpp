#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "pmreg/common.hpp"

using namespace pmreg;

TEST_CASE("gauss rules integrate their exactness degree") {
    for (int n = 1; n <= 8; ++n) {
        const auto& g = gauss_legendre(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double got = 0;
            for (int q = 0; q < n; ++q) got += g.w[q] * std::pow(g.x[q], k);
            double want = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
            REQUIRE(got == Catch::Approx(want).margin(1e-14));
        }
    }
    const auto& g2 = gauss_legendre(2);
    REQUIRE(g2.x[0] == Catch::Approx(-1.0 / std::sqrt(3.0)).margin(1e-15));
    REQUIRE(g2.x[1] == Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-15));
}

TEST_CASE("gauss_points_for_degree is sufficient") {
    for (int deg = 0; deg <= 12; ++deg) REQUIRE(2 * gauss_points_for_degree(deg) - 1 >= deg);
}

TEST_CASE("piecewise polynomials differentiate and integrate consistently") {
    poly p;  // 1 + 2x + 3x^2 on a local piece
    p.c = {1.0, 2.0, 3.0};
    REQUIRE(p(0.5) == Catch::Approx(1 + 1 + 0.75));
    poly dp = p.derivative();
    REQUIRE(dp(0.25) == Catch::Approx(2 + 6 * 0.25));

    piecewise_poly pp;
    pp.breaks = {0.0, 1.0, 2.0};
    pp.pieces = {p, p.derivative()};
    double direct = pp.integral();
    // 1 + 2x + 3x^2 over [0,1] is 3; 2 + 6x over [0,1] is 5
    REQUIRE(direct == Catch::Approx(8.0).margin(1e-14));
    piecewise_poly anti = pp.antiderivative();
    REQUIRE(anti(2.0) - anti(0.0) == Catch::Approx(8.0).margin(1e-14));
}

TEST_CASE("loglog fit recovers a known slope") {
    std::vector<double> x = {0.2, 0.1, 0.05, 0.025}, y;
    for (double xi : x) y.push_back(3.5 * std::pow(xi, 2.25));
    fit_result f = fit_loglog(x, y);
    REQUIRE(f.slope == Catch::Approx(2.25).margin(1e-12));
    REQUIRE(f.r2 == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(f.points == 4);
}

TEST_CASE("for_each_multi is lexicographic and complete") {
    idx<2> lo{-1, 2}, hi{1, 4};
    std::vector<idx<2>> seen;
    for_each_multi<2>(lo, hi, [&](const idx<2>& c) { seen.push_back(c); });
    REQUIRE(seen.size() == 4);
    REQUIRE(seen[0] == idx<2>{-1, 2});
    REQUIRE(seen[1] == idx<2>{-1, 3});
    REQUIRE(seen[3] == idx<2>{0, 3});
}

TEST_CASE("counter rng is deterministic and in range") {
    rng_stream a{rng_key(42, 7)}, b{rng_key(42, 7)}, c{rng_key(42, 8)};
    for (std::uint64_t i = 0; i < 100; ++i) {
        double u = a.uniform(i);
        REQUIRE(u == b.uniform(i));
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    REQUIRE(a.uniform(3) != c.uniform(3));
}

TEST_CASE("pod io roundtrips") {
    std::stringstream ss;
    write_pod(ss, 3.5);
    write_pod(ss, std::int32_t(-7));
    REQUIRE(read_pod<double>(ss) == 3.5);
    REQUIRE(read_pod<std::int32_t>(ss) == -7);
}

TEST_CASE("array arithmetic") {
    vec<2> a{1.0, 2.0}, b{0.5, -1.0};
    REQUIRE((a + b)[0] == 1.5);
    REQUIRE((a - b)[1] == 3.0);
    REQUIRE(dot(a, b) == Catch::Approx(0.5 - 2.0));
    REQUIRE(norm2(vec<2>{3.0, 4.0}) == Catch::Approx(5.0));
}
