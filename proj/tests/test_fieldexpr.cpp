#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "oracles.hpp"
#include "pmreg/fieldexpr.hpp"

using namespace pmreg;

namespace {
double ev(const std::string& s, int dim, vec<2> x, double t = 0) {
    return field_expr::parse(s, dim).eval(x.data(), 2, t);
}
}  // namespace

TEST_CASE("expression evaluation basics") {
    REQUIRE(ev("sin(t)*x2 + 2^3", 2, {0.0, 5.0}) == Catch::Approx(8.0));
    REQUIRE(ev("exp(x1 + x2/2)", 2, {0.3, 0.4}) == Catch::Approx(std::exp(0.5)));
    REQUIRE(ev("sin(t)*x2 + 2^3", 2, {0.0, 5.0}, M_PI / 2) == Catch::Approx(13.0));
    REQUIRE(ev("sqrt(abs(-9))", 2, {0.0, 0.0}) == Catch::Approx(3.0));
    REQUIRE(ev("cos(0) + 2.5e2", 2, {0.0, 0.0}) == Catch::Approx(251.0));
}

TEST_CASE("operator precedence and associativity") {
    vec<2> x{0.0, 0.0};
    REQUIRE(ev("2^3^2", 2, x) == Catch::Approx(512.0));  // right-assoc
    REQUIRE(ev("-2^2", 2, x) == Catch::Approx(-4.0));    // unary binds looser
    REQUIRE(ev("2*3+4", 2, x) == Catch::Approx(10.0));
    REQUIRE(ev("2+3*4", 2, x) == Catch::Approx(14.0));
    REQUIRE(ev("(1+2)*3", 2, x) == Catch::Approx(9.0));
    REQUIRE(ev("8/4/2", 2, x) == Catch::Approx(1.0));    // left-assoc
    REQUIRE(ev("1-2-3", 2, x) == Catch::Approx(-4.0));
    REQUIRE(ev("2*-3", 2, x) == Catch::Approx(-6.0));
}

TEST_CASE("evaluation faults raise eval_error") {
    vec<2> x{0.0, 0.0};
    REQUIRE_THROWS_AS(ev("1/x1", 2, x), eval_error);
    REQUIRE_THROWS_AS(ev("sqrt(x1 - 1)", 2, x), eval_error);
    REQUIRE_THROWS_AS(ev("exp(1000)", 2, x), eval_error);
    // arity guard: a 1d point cannot feed a 2d expression
    auto e = field_expr::parse("x2", 2);
    double one = 1.0;
    REQUIRE_THROWS_AS(e.eval(&one, 1, 0.0), eval_error);
}

TEST_CASE("parse failures carry the offending offset") {
    try {
        field_expr::parse("x1 + * 2", 2);
        FAIL("expected parse_error");
    } catch (const parse_error& pe) {
        REQUIRE(pe.offset == 5);
    }
    REQUIRE_THROWS_AS(field_expr::parse("x3", 2), parse_error);
    REQUIRE_THROWS_AS(field_expr::parse("foo(1)", 2), parse_error);
    REQUIRE_THROWS_AS(field_expr::parse("sin 1", 2), parse_error);
    REQUIRE_THROWS_AS(field_expr::parse("(1+2", 2), parse_error);
    REQUIRE_THROWS_AS(field_expr::parse("1 2", 2), parse_error);  // trailing token
    REQUIRE_THROWS_AS(field_expr::parse("", 2), parse_error);
    REQUIRE_THROWS_AS(field_expr::parse("x0", 2), parse_error);   // indices start at 1
}

TEST_CASE("nesting depth is capped") {
    std::string deep = "1";
    for (int i = 0; i < 100; ++i) deep = "(" + deep + ")";
    REQUIRE_THROWS_AS(field_expr::parse(deep, 2), parse_error);
    std::string ok = "1";
    for (int i = 0; i < 5; ++i) ok = "(" + ok + ")";
    REQUIRE(field_expr::parse(ok, 2).eval(nullptr, 2, 0.0) == Catch::Approx(1.0));
}

TEST_CASE("printed form parses back to the same function") {
    const char* cases[] = {
        "sin(t)*x2 + 2^3",
        "exp(-((x1 - 0.3)^2 + x2^2) / 0.02)",
        "-x1^2 + x2*t - sqrt(abs(x1))",
        "1/(2 + cos(x1))",
    };
    rng_seq rng(91);
    for (const char* c : cases) {
        auto e = field_expr::parse(c, 2);
        auto r = field_expr::parse(e.print(), 2);
        for (int i = 0; i < 20; ++i) {
            vec<2> x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            double t = rng.uniform(0.0, 2.0);
            REQUIRE(r.eval(x.data(), 2, t) == e.eval(x.data(), 2, t));
        }
    }
}

TEST_CASE("random token soup never crashes the parser") {
    const char* tok[] = {"x1", "x2", "t", "+", "-", "*", "/", "^",
                         "(", ")", "sin", "2", "0.5", ".", "abs"};
    rng_seq rng(17);
    int parsed = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        int len = 1 + int(rng.uniform() * 8);
        for (int i = 0; i < len; ++i) s += tok[int(rng.uniform() * 15)];
        try {
            auto e = field_expr::parse(s, 2);
            vec<2> x{0.3, -0.7};
            try {
                (void)e.eval(x.data(), 2, 1.0);
            } catch (const eval_error&) {
            }
            ++parsed;
        } catch (const parse_error&) {
        }
    }
    REQUIRE(parsed > 0);  // the soup does hit some valid expressions
}
