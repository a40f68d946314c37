#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pmreg/quadrature.hpp"

using namespace pmreg;

TEST_CASE("simplex matches basic-point enumeration on random feasible instances") {
    rng_seq rng(101);
    for (int inst = 0; inst < 10; ++inst) {
        int m = 2 + int(rng.uniform() * 3);   // 2..4 rows
        int n = m + 1 + int(rng.uniform() * 4);  // up to 8 columns
        std::vector<double> A(std::size_t(m) * n), b(m, 0.0), c(n);
        for (auto& v : A) v = rng.uniform();  // nonnegative keeps it bounded
        for (auto& v : c) v = 0.1 + rng.uniform();
        // force feasibility through a known nonnegative point
        std::vector<double> w(n, 0.0);
        for (int j = 0; j < m; ++j) w[std::size_t(rng.uniform() * n)] += rng.uniform();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) b[i] += A[std::size_t(i) * n + j] * w[j];
        lp_result got = lp_solve(m, n, A, b, c);
        oracle::lp_reference want = oracle::lp_enumerate(m, n, A, b, c);
        REQUIRE(want.feasible);
        REQUIRE(got.status == lp_status::optimal);
        REQUIRE(got.objective ==
                Catch::Approx(want.objective).margin(1e-9).epsilon(1e-9));
        // solution satisfies the constraints
        for (int i = 0; i < m; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += A[std::size_t(i) * n + j] * got.x[j];
            REQUIRE(s == Catch::Approx(b[i]).margin(1e-9));
        }
        for (double v : got.x) REQUIRE(v >= 0.0);
    }
}

TEST_CASE("simplex detects infeasible and unbounded problems") {
    // nonnegative row with negative rhs has no nonnegative solution
    std::vector<double> A{1.0, 2.0};
    lp_result r = lp_solve(1, 2, A, {-1.0}, {1.0, 1.0});
    REQUIRE(r.status == lp_status::infeasible);
    // negative cost on a column no constraint touches
    std::vector<double> A2{1.0, 0.0};
    lp_result r2 = lp_solve(1, 2, A2, {1.0}, {1.0, -1.0});
    REQUIRE(r2.status == lp_status::unbounded);
    // zero rhs: the zero vector is optimal
    lp_result r3 = lp_solve(1, 2, A, {0.0}, {1.0, 1.0});
    REQUIRE(r3.status == lp_status::optimal);
    REQUIRE(r3.objective == Catch::Approx(0.0).margin(1e-12));
}

namespace {

struct setup {
    fictitious_domain<2> fd;
    std::shared_ptr<const spline_space<2>> space;
    moment_table<2> mt;
};

setup disk_setup(int n, double sigma) {
    auto mesh = make_disk_mesh(64);
    auto fd = classify(make_grid(mesh, sigma, 1), mesh);
    enforce_reachability(fd, 3);
    auto space = make_space(fd, n);
    auto mt = build_moment_table(fd, space);
    return {std::move(fd), space, std::move(mt)};
}

double rule_moment(const cell_rule<2>& r, int n, double sigma, const idx<2>& lam,
                   const idx<2>& mu) {
    double acc = 0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        double v = r.w[i];
        for (int d = 0; d < 2; ++d)
            v *= bspline(n, r.x[i][d] / sigma - lam[d]) * bspline(n, r.x[i][d] / sigma - mu[d]);
        acc += v;
    }
    return acc;
}

}  // namespace

TEST_CASE("interior pattern integrates pair moments exactly") {
    auto st = disk_setup(3, 0.2);
    const auto& s = *st.space;
    for (std::int32_t r = 0; r < s.count(); ++r) {
        if (!support_interior(st.fd, s, s.lam[r])) continue;
        cell_rule<2> rule = interior_rule(s, s.lam[r]);
        for (std::size_t oi = 0; oi < st.mt.offsets.size(); ++oi) {
            idx<2> mu = s.lam[r] + st.mt.offsets[oi];
            double want = fullspace_moment<2>(3, 0.2, st.mt.offsets[oi]);
            REQUIRE(rule_moment(rule, 3, 0.2, s.lam[r], mu) ==
                    Catch::Approx(want).margin(1e-14));
        }
        break;  // one representative is enough; the acceptance suite sweeps all
    }
}

TEST_CASE("cut rules satisfy moments, positivity and the weight bound") {
    auto st = disk_setup(3, 0.1);
    rule_options opt;
    double bound = opt.c_stab * std::pow(3 * 0.1, 2);
    const auto& s = *st.space;
    int tested = 0;
    for (std::int32_t r = 0; r < s.count() && tested < 40; ++r) {
        if (support_interior(st.fd, s, s.lam[r])) continue;
        cell_rule<2> rule = cut_rule(st.fd, s, st.mt, s.lam[r], opt);
        ++tested;
        double wsum = 0;
        for (std::size_t i = 0; i < rule.w.size(); ++i) {
            REQUIRE(rule.w[i] >= 0.0);
            REQUIRE(st.fd.contains(rule.x[i]));
            wsum += rule.w[i];
        }
        REQUIRE(wsum <= bound * (1 + 1e-12));
        for (std::size_t oi = 0; oi < st.mt.offsets.size(); ++oi) {
            idx<2> mu = s.lam[r] + st.mt.offsets[oi];
            double want = std::max(0.0, st.mt.at(r, int(oi)));
            REQUIRE(rule_moment(rule, 3, 0.1, s.lam[r], mu) ==
                    Catch::Approx(want).margin(1e-10 * std::pow(3 * 0.1, 2)));
        }
    }
    REQUIRE(tested == 40);
}

TEST_CASE("cut rules are deterministic in the seed") {
    auto st = disk_setup(3, 0.2);
    const auto& s = *st.space;
    for (std::int32_t r = 0; r < s.count(); ++r) {
        if (support_interior(st.fd, s, s.lam[r])) continue;
        rule_options opt;
        cell_rule<2> a = cut_rule(st.fd, s, st.mt, s.lam[r], opt);
        cell_rule<2> b = cut_rule(st.fd, s, st.mt, s.lam[r], opt);
        REQUIRE(a.w == b.w);
        REQUIRE(a.x.size() == b.x.size());
        break;
    }
}

TEST_CASE("particle field from a spline integrates the spline") {
    auto st = disk_setup(3, 0.15);
    spline_field<2> f(st.space);
    rng_seq rng(7);
    for (auto& c : f.c) c = rng.uniform(-1.0, 1.0);
    particle_field<2> p = particles_from_spline(st.fd, f, st.mt);
    REQUIRE(p.size() > 0);
    double direct = integrate_domain(st.fd, [&](const vec<2>& x) { return eval_field(f, x); },
                                     2 * 3);
    REQUIRE(p.weight_sum() == Catch::Approx(direct).margin(1e-9));
}
