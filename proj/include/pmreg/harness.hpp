#pragma once

// experiment drivers. each study builds geometry per scale, runs the
// pipeline pieces it exercises, and writes report.csv / orders.csv /
// manifest.txt plus per-level artifacts into the output directory.
//
// advect streams particles in fixed-size chunks (create -> advect -> scatter)
// so the finest levels never materialize the full particle list; per-step
// weight sums are still recomputed from every chunk in index order, so the
// conservation check is bit-for-bit meaningful.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmreg/fieldexpr.hpp"
#include "pmreg/particles.hpp"

namespace pmreg {

struct study_config {
    std::string study;
    std::string geom = "disk";
    int n = 3;
    std::vector<double> sigmas = {0.2, 0.1, 0.05};
    double eps = 1.0;
    double c_stab = 2.0;
    int k = 0;  // h = 2^-k sigma; k < 0 selects ceil(log2(1/sigma)) (h <= sigma^2)
    double dt = 0;  // 0: chosen so dt^4 stays below the spatial budget
    double t_end = 1.5707963267948966;
    std::string u0 = "exp(-((x1 - 0.3)^2 + x2^2) / 0.02)";
    std::string vel_x1, vel_x2;  // empty: built-in rigid rotation
    double omega = 1.0;
    int k_max = 3;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    int remesh_every = 0;  // advect: regularize + reseed every this many steps
    int base_gon = 64;     // disk vertex count at the coarsest scale
    int points_per_facet = 0;
    bool dump_fields = true;
};

inline void validate_config(const study_config& cfg, std::size_t dim) {
    if (cfg.study != "extend" && cfg.study != "condition" && cfg.study != "quadrature" &&
        cfg.study != "advect")
        throw error("unknown study '" + cfg.study + "'");
    if (cfg.n < 2 || cfg.n > max_spline_order) throw error("order n out of range");
    if (cfg.sigmas.empty()) throw error("empty scale list");
    for (std::size_t i = 1; i < cfg.sigmas.size(); ++i)
        if (!(cfg.sigmas[i] < cfg.sigmas[i - 1]))
            throw error("scale list must be strictly decreasing");
    if ((cfg.study == "advect" || cfg.study == "quadrature") && !(cfg.n > int(dim)))
        throw error("pipeline studies need n > d");
    if (cfg.c_stab <= 1.0) throw error("c_stab must exceed 1");
}

// ------------------------------------------------------------- reporting

struct study_report {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    // metric -> (slope, r2); only fits with >= 3 levels and r2 >= 0.95 land here
    std::vector<std::tuple<std::string, double, double>> orders;
    std::vector<std::string> notes;
};

namespace detail {

inline void fit_order(study_report& rep, const std::string& metric,
                      const std::vector<double>& scale, const std::vector<double>& err) {
    if (scale.size() < 3) {
        rep.notes.push_back("order withheld for " + metric + ": fewer than 3 levels");
        return;
    }
    fit_result f = fit_loglog(scale, err);
    if (f.points < 3) {
        rep.notes.push_back("order withheld for " + metric + ": nonpositive errors");
        return;
    }
    if (f.r2 < 0.95) {
        std::ostringstream os;
        os << "order withheld for " << metric << ": r2=" << f.r2 << " below 0.95";
        rep.notes.push_back(os.str());
        return;
    }
    rep.orders.emplace_back(metric, f.slope, f.r2);
}

inline double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace detail

inline void write_report_csv(const std::filesystem::path& p, const study_report& rep) {
    std::ofstream os(p);
    os.precision(17);
    for (std::size_t i = 0; i < rep.columns.size(); ++i)
        os << rep.columns[i] << (i + 1 < rep.columns.size() ? "," : "\n");
    for (const auto& row : rep.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
}

inline void write_orders_csv(const std::filesystem::path& p, const study_report& rep) {
    std::ofstream os(p);
    os.precision(17);
    os << "metric,order,r2\n";
    for (const auto& [m, s, r2] : rep.orders) os << m << "," << s << "," << r2 << "\n";
}

inline void write_manifest(const std::filesystem::path& p, const study_config& cfg,
                           const study_report& rep,
                           const std::vector<std::string>& extra = {}) {
    std::ofstream os(p);
    os.precision(17);
    os << "study=" << cfg.study << "\ngeom=" << cfg.geom << "\nn=" << cfg.n << "\nscales=";
    for (std::size_t i = 0; i < cfg.sigmas.size(); ++i)
        os << cfg.sigmas[i] << (i + 1 < cfg.sigmas.size() ? "," : "");
    os << "\neps=" << cfg.eps << "\nc_stab=" << cfg.c_stab << "\nk=" << cfg.k
       << "\ndt=" << cfg.dt << "\nT=" << cfg.t_end << "\nu0=" << cfg.u0
       << "\nvel_x1=" << cfg.vel_x1 << "\nvel_x2=" << cfg.vel_x2 << "\nomega=" << cfg.omega
       << "\nseed=" << cfg.seed << "\nremesh_every=" << cfg.remesh_every
       << "\nbase_gon=" << cfg.base_gon << "\n";
    for (const auto& e : extra) os << e << "\n";
    for (const auto& n : rep.notes) os << "note=" << n << "\n";
}

// ------------------------------------------------------------- geometry

template <std::size_t D> boundary_mesh<D> build_geometry(const study_config&, double, double);

template <> inline boundary_mesh<1> build_geometry<1>(const study_config& cfg, double, double) {
    if (cfg.geom == "interval") return make_interval_mesh(-1.0, 1.0);
    if (cfg.geom.rfind("mesh:", 0) == 0) return read_mesh_file<1>(cfg.geom.substr(5));
    throw error("geometry '" + cfg.geom + "' is not one-dimensional");
}

template <> inline boundary_mesh<2> build_geometry<2>(const study_config& cfg, double scale,
                                                      double scale0) {
    if (cfg.geom == "disk") {
        int m = std::max(16, int(std::lround(cfg.base_gon * scale0 / scale)));
        return make_disk_mesh(m);
    }
    if (cfg.geom == "rect") return make_rect_mesh({-0.753, -0.571}, {0.766, 0.589});
    if (cfg.geom.rfind("mesh:", 0) == 0) return read_mesh_file<2>(cfg.geom.substr(5));
    throw error("geometry '" + cfg.geom + "' is not two-dimensional");
}

inline std::size_t geometry_dim(const study_config& cfg) {
    if (cfg.geom == "interval") return 1;
    if (cfg.geom == "disk" || cfg.geom == "rect") return 2;
    if (cfg.geom.rfind("mesh:", 0) == 0) return mesh_file_dim(cfg.geom.substr(5));
    throw error("unknown geometry '" + cfg.geom + "'");
}

// error of a field against an exact function over the full cells of the
// fictitious domain (L2 or max over tensor gauss samples)
template <std::size_t D, class F>
double cell_union_error(const fictitious_domain<D>& fd, const spline_field<D>& f, F&& exact,
                        double p) {
    const bool inf = std::isinf(p);
    const int pts = f.space->n + 2;
    const auto& g = gauss_legendre(pts);
    double acc = 0;
    for_each_multi<D>(fd.g.lo, fd.g.hi, [&](const idx<D>& c) {
        if (fd.at(c) == cell_class::outside) return;
        box<D> b = fd.g.cell_box(c);
        int total = 1;
        for (std::size_t d = 0; d < D; ++d) total *= pts;
        for (int q = 0; q < total; ++q) {
            vec<D> x;
            double w = 1;
            int rem = q;
            for (int d = int(D) - 1; d >= 0; --d) {
                int j = rem % pts;
                rem /= pts;
                x[d] = 0.5 * (b.lo[d] + b.hi[d]) + 0.5 * (b.hi[d] - b.lo[d]) * g.x[j];
                w *= 0.5 * (b.hi[d] - b.lo[d]) * g.w[j];
            }
            double e = std::abs(eval_field(f, x) - exact(x));
            if (inf)
                acc = std::max(acc, e);
            else
                acc += w * e * e;
        }
    });
    return inf ? acc : std::sqrt(acc);
}

// ----------------------------------------------------------- run_extend

template <std::size_t D> study_report run_extend_d(const study_config& cfg) {
    field_expr u0 = field_expr::parse(cfg.u0, int(D));
    study_report rep;
    rep.columns = {"scale",    "basis",   "cut_cells", "achieved_k", "iterations",
                   "residual", "l2_omega", "linf_omega", "l2_cells",  "seconds"};
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<double> scales, e2, einf, ecell;
    for (std::size_t lvl = 0; lvl < cfg.sigmas.size(); ++lvl) {
        double sigma = cfg.sigmas[lvl];
        double t0 = detail::now_seconds();
        auto mesh = build_geometry<D>(cfg, sigma, cfg.sigmas[0]);
        auto fd = classify(make_grid(mesh, sigma, 1), mesh);
        enforce_reachability(fd, cfg.k_max);
        auto space = make_space(fd, cfg.n);
        auto mt = build_moment_table(fd, space, cfg.points_per_facet);
        auto J = assemble_ghost_penalty(fd, space);
        auto exact = [&](const vec<D>& x) { return u0(x, 0.0); };
        std::vector<double> rhs = load_vector(fd, space, exact);
        solve_report sr;
        spline_field<D> f = approximate_extension(mt, J, cfg.eps, rhs, sr);
        double l2 = domain_norm(fd, [&](const vec<D>& x) { return eval_field(f, x) - exact(x); },
                                2.0, 2 * cfg.n + 2);
        double li = domain_norm(fd, [&](const vec<D>& x) { return eval_field(f, x) - exact(x); },
                                std::numeric_limits<double>::infinity(), 2 * cfg.n + 2);
        double lc = cell_union_error(fd, f, exact, 2.0);
        double secs = detail::now_seconds() - t0;
        rep.rows.push_back({sigma, double(space->count()), double(fd.count_of(cell_class::cut)),
                            double(fd.achieved_k), double(sr.iterations), sr.residual, l2, li,
                            lc, secs});
        scales.push_back(sigma);
        e2.push_back(l2);
        einf.push_back(li);
        ecell.push_back(lc);
        if (cfg.dump_fields) {
            std::ofstream os(std::filesystem::path(cfg.out_dir) /
                                 ("field_" + std::to_string(lvl) + ".pmsf"),
                             std::ios::binary);
            write_field(os, f);
        }
    }
    detail::fit_order(rep, "l2_omega", scales, e2);
    detail::fit_order(rep, "linf_omega", scales, einf);
    detail::fit_order(rep, "l2_cells", scales, ecell);
    return rep;
}

// --------------------------------------------------------- run_condition

template <std::size_t D> study_report run_condition_d(const study_config& cfg) {
    field_expr u0 = field_expr::parse(cfg.u0, int(D));
    study_report rep;
    rep.columns = {"scale",      "offset_rel", "cond_eps", "cond_zero",
                   "iterations", "lambda_min_scaled", "lambda_max_scaled", "seconds"};
    std::filesystem::create_directories(cfg.out_dir);
    const double offsets[] = {0.0, 1e-2, 1e-4, 1e-6};
    for (double sigma : cfg.sigmas) {
        double sd = 1;
        for (std::size_t d = 0; d < D; ++d) sd *= sigma;
        std::vector<double> conds, iters;
        for (double off : offsets) {
            double t0 = detail::now_seconds();
            auto mesh = build_geometry<D>(cfg, sigma, cfg.sigmas[0]);
            vec<D> shift;
            for (std::size_t d = 0; d < D; ++d) shift[d] = off * sigma;
            mesh = translate(mesh, shift);
            auto fd = classify(make_grid(mesh, sigma, 1), mesh);
            enforce_reachability(fd, cfg.k_max);
            auto space = make_space(fd, cfg.n);
            auto mt = build_moment_table(fd, space, cfg.points_per_facet);
            auto J = assemble_ghost_penalty(fd, space);
            csr_matrix a_eps = assemble_operator(mt, &J, cfg.eps);
            csr_matrix a_raw = assemble_operator(mt, &J, 0.0);
            condition_estimate ce = estimate_condition(a_eps);
            condition_estimate c0 = estimate_condition(a_raw);
            std::vector<double> rhs =
                load_vector(fd, space, [&](const vec<D>& x) { return u0(x, 0.0); });
            solve_report sr;
            pcg(a_eps, rhs, sr);
            double secs = detail::now_seconds() - t0;
            rep.rows.push_back({sigma, off, ce.cond, c0.cond, double(sr.iterations),
                                ce.lambda_min / sd, ce.lambda_max / sd, secs});
            conds.push_back(ce.cond);
            iters.push_back(double(sr.iterations));
        }
        auto [cmin, cmax] = std::minmax_element(conds.begin(), conds.end());
        auto [imin, imax] = std::minmax_element(iters.begin(), iters.end());
        std::ostringstream os;
        os << "scale " << sigma << ": cond ratio " << *cmax / *cmin << ", iteration ratio "
           << *imax / *imin;
        rep.notes.push_back(os.str());
    }
    return rep;
}

// -------------------------------------------------------- run_quadrature

template <std::size_t D> study_report run_quadrature_d(const study_config& cfg) {
    field_expr u0 = field_expr::parse(cfg.u0, int(D));
    study_report rep;
    rep.columns = {"scale",      "basis",        "cut_rules",  "particles", "max_residual_rel",
                   "max_weight_ratio", "err_phi1", "err_phi2", "seconds"};
    std::filesystem::create_directories(cfg.out_dir);
    auto phi1 = [](const vec<D>& x) {
        double s = 0;
        for (std::size_t d = 0; d < D; ++d) s += x[d];
        return std::exp(s);
    };
    auto phi2 = [](const vec<D>& x) {
        double s = 1;
        for (std::size_t d = 0; d < D; ++d) s *= std::sin(x[d]);
        return s;
    };
    std::vector<double> scales, ef1, ef2;
    rule_options ropt;
    ropt.c_stab = cfg.c_stab;
    ropt.seed = cfg.seed;
    for (double h : cfg.sigmas) {
        double t0 = detail::now_seconds();
        auto mesh = build_geometry<D>(cfg, h, cfg.sigmas[0]);
        auto fd = classify(make_grid(mesh, h, 1), mesh);
        enforce_reachability(fd, cfg.k_max);
        auto space = make_space(fd, cfg.n);
        auto mt = build_moment_table(fd, space, cfg.points_per_facet);
        double hd = 1, bound = cfg.c_stab;
        for (std::size_t d = 0; d < D; ++d) {
            hd *= cfg.n * h;
            bound *= cfg.n * h;
        }
        double max_resid = 0, max_ratio = 0;
        std::int64_t cut_rules = 0, particles = 0;
        spline_field<D> uh =
            quasi_interpolate<D>(space, [&](vec<D> x) { return u0(x, 0.0); });
        double s1 = 0, s2 = 0;  // particle functionals
        for (std::int32_t rank = 0; rank < space->count(); ++rank) {
            const idx<D>& lam = space->lam[rank];
            cell_rule<D> r;
            if (support_interior(fd, *space, lam)) {
                r = interior_rule(*space, lam);
            } else {
                r = cut_rule(fd, *space, mt, lam, ropt);
                ++cut_rules;
            }
            particles += std::int64_t(r.x.size());
            // residual against every overlapping moment
            for (std::size_t oi = 0; oi < mt.offsets.size(); ++oi) {
                idx<D> mu = lam + mt.offsets[oi];
                if (space->rank_of(mu) < 0) continue;
                double got = 0;
                for (std::size_t i = 0; i < r.x.size(); ++i) {
                    double v = r.w[i];
                    for (std::size_t d = 0; d < D; ++d) {
                        double ux = r.x[i][d] / h;
                        v *= bspline(cfg.n, ux - lam[d]) * bspline(cfg.n, ux - mu[d]);
                    }
                    got += v;
                }
                max_resid = std::max(max_resid, std::abs(got - mt.at(rank, int(oi))) / hd);
            }
            max_ratio = std::max(max_ratio, r.weight_sum() / bound);
            double c = uh.c[rank];
            for (std::size_t i = 0; i < r.x.size(); ++i) {
                double b = 1;
                for (std::size_t d = 0; d < D; ++d)
                    b *= bspline(cfg.n, r.x[i][d] / h - lam[d]);
                double U = r.w[i] * c * b;
                s1 += U * phi1(r.x[i]);
                s2 += U * phi2(r.x[i]);
            }
        }
        double i1 = integrate_domain(fd, [&](const vec<D>& x) { return eval_field(uh, x) * phi1(x); }, 12);
        double i2 = integrate_domain(fd, [&](const vec<D>& x) { return eval_field(uh, x) * phi2(x); }, 12);
        double secs = detail::now_seconds() - t0;
        rep.rows.push_back({h, double(space->count()), double(cut_rules), double(particles),
                            max_resid, max_ratio, std::abs(s1 - i1), std::abs(s2 - i2), secs});
        scales.push_back(h);
        ef1.push_back(std::abs(s1 - i1));
        ef2.push_back(std::abs(s2 - i2));
    }
    detail::fit_order(rep, "err_phi1", scales, ef1);
    detail::fit_order(rep, "err_phi2", scales, ef2);
    return rep;
}

// ------------------------------------------------------------ run_advect
// d = 2 pipeline: extend at sigma, refine to h, stream particles through RK4,
// regularize at h, compare against the exactly rotated initial data.

struct advect_level_result {
    double sigma = 0, h = 0;
    std::int64_t particles = 0, escaped = 0;
    bool weight_sums_constant = true;
    double weight_sum = 0;
    double l2 = 0, linf = 0;
    int iterations = 0;
    int steps = 0;
    double dt = 0;
};

inline advect_level_result advect_one_level(const study_config& cfg, double sigma,
                                            double sigma0, std::filesystem::path out,
                                            int level) {
    field_expr u0x = field_expr::parse(cfg.u0, 2);
    auto u0 = [&](const vec<2>& x) { return u0x(x, 0.0); };
    advect_level_result res;
    res.sigma = sigma;

    velocity_field<2> vel;
    if (cfg.vel_x1.empty() && cfg.vel_x2.empty()) {
        vel = make_rotation(cfg.omega);
    } else {
        field_expr vx = field_expr::parse(cfg.vel_x1, 2), vy = field_expr::parse(cfg.vel_x2, 2);
        vel.eval = [vx, vy](const vec<2>& x, double t) {
            return vec<2>{vx.eval(x.data(), 2, t), vy.eval(x.data(), 2, t)};
        };
    }

    auto mesh = build_geometry<2>(cfg, sigma, sigma0);
    double tangency = max_normal_velocity(vel, mesh);
    if (tangency > 1e-10)
        std::fprintf(stderr, "warning: velocity is not tangential (max |a.n| = %.3e)\n",
                     tangency);

    // coarse side: approximate extension of the initial data
    auto fd_s = classify(make_grid(mesh, sigma, 1), mesh);
    enforce_reachability(fd_s, cfg.k_max);
    auto space_s = make_space(fd_s, cfg.n);
    auto mt_s = build_moment_table(fd_s, space_s, cfg.points_per_facet);
    auto j_s = assemble_ghost_penalty(fd_s, space_s);
    solve_report sr0;
    spline_field<2> u_sigma =
        approximate_extension(mt_s, j_s, cfg.eps, load_vector(fd_s, space_s, u0), sr0);

    // fine side
    int k = cfg.k >= 0 ? cfg.k : int(std::ceil(std::log2(1.0 / sigma)));
    double h = std::ldexp(sigma, -k);
    res.h = h;
    auto fd_h = k == 0 ? fd_s : classify(make_grid(mesh, h, 1), mesh);
    if (k != 0) enforce_reachability(fd_h, cfg.k_max);
    auto space_h = k == 0 ? space_s : make_space(fd_h, cfg.n);
    auto mt_h = k == 0 ? mt_s : build_moment_table(fd_h, space_h, cfg.points_per_facet);
    auto j_h = k == 0 ? j_s : assemble_ghost_penalty(fd_h, space_h);
    spline_field<2> u_h = restrict_field(two_scale_refine(u_sigma, k), space_h);

    // time step: dt^4 under the spatial budget ~ sigma^{n-1}
    double dt = cfg.dt;
    if (dt <= 0) dt = std::pow(0.05 * std::pow(sigma, cfg.n - 1), 0.25);
    int steps = std::max(1, int(std::ceil(cfg.t_end / dt)));
    dt = cfg.t_end / steps;
    res.dt = dt;
    res.steps = steps;

    int segments = 1, seg_steps = steps;
    if (cfg.remesh_every > 0 && cfg.remesh_every < steps) {
        seg_steps = cfg.remesh_every;
        segments = (steps + seg_steps - 1) / seg_steps;
    }

    rule_options ropt;
    ropt.c_stab = cfg.c_stab;
    ropt.seed = cfg.seed;

    rk4_rotation_step rot(cfg.omega, dt);
    const bool fast_rot = vel.rigid_rotation;
    const std::size_t chunk_cap = 1u << 22;

    spline_field<2> current = u_h;
    std::vector<double> step_sums;  // one per step, accumulated over chunks
    int steps_done = 0;
    for (int seg = 0; seg < segments; ++seg) {
        int s_here = std::min(seg_steps, steps - steps_done);
        if (s_here <= 0) break;
        double t_seg = steps_done * dt;
        std::vector<double> rhs(space_h->count(), 0.0);
        std::vector<double> sums(s_here + 1, 0.0);
        std::vector<double> px, py, pu;
        px.reserve(chunk_cap);
        py.reserve(chunk_cap);
        pu.reserve(chunk_cap);

        auto flush = [&]() {
            if (pu.empty()) return;
            const std::size_t np = pu.size();
            double s0 = 0;
            for (double v : pu) s0 += v;
            sums[0] += s0;
            for (int s = 0; s < s_here; ++s) {
                if (fast_rot) {
                    for (std::size_t i = 0; i < np; ++i) rot.apply(px[i], py[i]);
                } else {
                    double t = t_seg + s * dt;
                    for (std::size_t i = 0; i < np; ++i) {
                        vec<2> x{px[i], py[i]};
                        x = rk4_step(vel, x, t, dt);
                        px[i] = x[0];
                        py[i] = x[1];
                    }
                }
                double ss = 0;  // recomputed per step so any weight mutation shows up
                for (double v : pu) ss += v;
                sums[s + 1] += ss;
            }
            idx<2> zero{};
            for (std::size_t i = 0; i < np; ++i) {
                vec<2> x{px[i], py[i]};
                if (!fd_h.contains(x)) ++res.escaped;  // still scatters; window clips it
                double u = pu[i];
                for_each_active(*space_h, x, zero,
                                [&](std::int32_t r, double v) { rhs[r] += u * v; });
            }
            res.particles += std::int64_t(np);
            px.clear();
            py.clear();
            pu.clear();
        };

        for (std::int32_t rank = 0; rank < space_h->count(); ++rank) {
            const idx<2>& lam = space_h->lam[rank];
            double c = current.c[rank];
            cell_rule<2> r = support_interior(fd_h, *space_h, lam)
                                 ? interior_rule(*space_h, lam)
                                 : cut_rule(fd_h, *space_h, mt_h, lam, ropt);
            for (std::size_t i = 0; i < r.x.size(); ++i) {
                double b = bspline(cfg.n, r.x[i][0] / h - lam[0]) *
                           bspline(cfg.n, r.x[i][1] / h - lam[1]);
                px.push_back(r.x[i][0]);
                py.push_back(r.x[i][1]);
                pu.push_back(r.w[i] * c * b);
            }
            if (pu.size() >= chunk_cap) flush();
        }
        flush();

        // conservation must hold bitwise within a segment; remeshing re-creates
        // the particles, so separate segments own separate reference sums
        for (double s : sums)
            if (std::memcmp(&s, &sums.front(), sizeof(double)) != 0)
                res.weight_sums_constant = false;
        step_sums.insert(step_sums.end(), sums.begin(), sums.end());
        solve_report sr;
        current = approximate_extension(mt_h, j_h, cfg.eps, rhs, sr);
        res.iterations += sr.iterations;
        steps_done += s_here;
    }

    res.weight_sum = step_sums.empty() ? 0.0 : step_sums.front();

    // exact transported solution: rotate the evaluation point back
    double T = cfg.t_end, cw = std::cos(cfg.omega * T), sw = std::sin(cfg.omega * T);
    auto exact = [&](const vec<2>& x) {
        vec<2> y{cw * x[0] + sw * x[1], -sw * x[0] + cw * x[1]};
        return u0(y);
    };
    res.l2 = domain_norm(fd_h, [&](const vec<2>& x) { return eval_field(current, x) - exact(x); },
                         2.0, 2 * cfg.n + 2);
    res.linf =
        domain_norm(fd_h, [&](const vec<2>& x) { return eval_field(current, x) - exact(x); },
                    std::numeric_limits<double>::infinity(), 2 * cfg.n + 2);
    if (cfg.dump_fields) {
        std::ofstream os(out / ("field_" + std::to_string(level) + ".pmsf"), std::ios::binary);
        write_field(os, current);
    }
    return res;
}

inline study_report run_advect_d(const study_config& cfg) {
    study_report rep;
    rep.columns = {"scale", "h",          "basis_particles", "escaped", "iterations",
                   "steps", "dt",         "weight_constant", "l2_omega", "linf_omega",
                   "seconds"};
    std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    std::vector<double> scales, e2;
    for (std::size_t lvl = 0; lvl < cfg.sigmas.size(); ++lvl) {
        double t0 = detail::now_seconds();
        advect_level_result r =
            advect_one_level(cfg, cfg.sigmas[lvl], cfg.sigmas[0], out, int(lvl));
        double secs = detail::now_seconds() - t0;
        rep.rows.push_back({r.sigma, r.h, double(r.particles), double(r.escaped),
                            double(r.iterations), double(r.steps), r.dt,
                            r.weight_sums_constant ? 1.0 : 0.0, r.l2, r.linf, secs});
        scales.push_back(r.sigma);
        e2.push_back(r.l2);
        if (!r.weight_sums_constant)
            rep.notes.push_back("weight sum drifted at scale " + std::to_string(r.sigma));
    }
    detail::fit_order(rep, "l2_omega", scales, e2);
    return rep;
}

// ------------------------------------------------------------- dispatch

inline study_report run_study(const study_config& cfg) {
    std::size_t dim = geometry_dim(cfg);
    validate_config(cfg, dim);
    study_report rep;
    if (cfg.study == "extend")
        rep = dim == 1 ? run_extend_d<1>(cfg) : run_extend_d<2>(cfg);
    else if (cfg.study == "condition")
        rep = dim == 1 ? run_condition_d<1>(cfg) : run_condition_d<2>(cfg);
    else if (cfg.study == "quadrature")
        rep = dim == 1 ? run_quadrature_d<1>(cfg) : run_quadrature_d<2>(cfg);
    else
        rep = run_advect_d(cfg);
    std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    write_report_csv(out / "report.csv", rep);
    write_orders_csv(out / "orders.csv", rep);
    write_manifest(out / "manifest.txt", cfg, rep);
    return rep;
}

}  // namespace pmreg
