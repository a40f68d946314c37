#pragma once

// nonnegative particle quadrature: per-index rules with weights w >= 0 that
// reproduce every overlapping moment int_Omega b_lam b_mu exactly. interior
// indices reuse one tensor-gauss pattern; cut indices solve a small dense LP
// (minimize sum of weights) over candidate points inside the domain.

#include "pmreg/moments.hpp"

namespace pmreg {

// ------------------------------------------------------------- dense LP
// minimize c.x subject to A x = b, x >= 0 (rows may have any sign of b).
// two-phase tableau simplex with bland's rule; redundant rows are detected
// in phase 1 and dropped.

enum class lp_status { optimal, infeasible, unbounded, max_iterations };

struct lp_result {
    lp_status status = lp_status::infeasible;
    std::vector<double> x;
    double objective = 0;
    int iterations = 0;
};

inline const char* to_string(lp_status s) {
    switch (s) {
        case lp_status::optimal: return "optimal";
        case lp_status::infeasible: return "infeasible";
        case lp_status::unbounded: return "unbounded";
        default: return "max_iterations";
    }
}

inline lp_result lp_solve(int m, int n, const std::vector<double>& A, std::vector<double> b,
                          const std::vector<double>& c, int max_iter = 0) {
    assert(int(A.size()) == m * n && int(b.size()) == m && int(c.size()) == n);
    if (max_iter <= 0) max_iter = 200 * (m + n);
    const int cols = n + m;  // artificials appended
    std::vector<double> T(std::size_t(m) * cols);
    std::vector<int> basis(m);
    double bscale = 1e-300;
    for (int i = 0; i < m; ++i) {
        double s = b[i] < 0 ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j) T[std::size_t(i) * cols + j] = s * A[std::size_t(i) * n + j];
        T[std::size_t(i) * cols + n + i] = 1.0;
        b[i] *= s;
        basis[i] = n + i;
        bscale = std::max(bscale, b[i]);
    }
    lp_result res;
    std::vector<double> z(cols);  // maintained reduced-cost row
    std::vector<char> allowed(cols, 1);

    auto pivot = [&](int pr, int pc) {
        double* prow = &T[std::size_t(pr) * cols];
        double pv = prow[pc];
        for (int j = 0; j < cols; ++j) prow[j] /= pv;
        b[pr] /= pv;
        for (int i = 0; i < m; ++i) {
            if (i == pr) continue;
            double f = T[std::size_t(i) * cols + pc];
            if (f == 0.0) continue;
            double* row = &T[std::size_t(i) * cols];
            for (int j = 0; j < cols; ++j) row[j] -= f * prow[j];
            row[pc] = 0.0;
            b[i] -= f * b[pr];
            if (b[i] < 0 && b[i] > -1e-11 * bscale) b[i] = 0;
        }
        double zf = z[pc];
        if (zf != 0.0) {
            for (int j = 0; j < cols; ++j) z[j] -= zf * prow[j];
            z[pc] = 0.0;
        }
        basis[pr] = pc;
    };

    auto run = [&](const std::vector<double>& cost, int phase) -> lp_status {
        for (int j = 0; j < cols; ++j) {
            double zj = cost[j];
            for (int i = 0; i < m; ++i) {
                double cb = cost[basis[i]];
                if (cb != 0.0) zj -= cb * T[std::size_t(i) * cols + j];
            }
            z[j] = zj;
        }
        while (true) {
            if (res.iterations++ > max_iter) return lp_status::max_iterations;
            int enter = -1;  // bland: lowest admissible index with negative cost
            for (int j = 0; j < cols; ++j) {
                if (allowed[j] && z[j] < -1e-9) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return lp_status::optimal;
            int leave = -1;
            double best = 0;
            for (int i = 0; i < m; ++i) {
                double a = T[std::size_t(i) * cols + enter];
                if (a > 1e-11) {
                    double r = b[i] / a;
                    if (leave < 0 || r < best - 1e-15 ||
                        (std::abs(r - best) <= 1e-15 && basis[i] < basis[leave])) {
                        best = r;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return phase == 1 ? lp_status::infeasible : lp_status::unbounded;
            pivot(leave, enter);
        }
    };

    // phase 1
    std::vector<double> c1(cols, 0.0);
    for (int j = n; j < cols; ++j) c1[j] = 1.0;
    lp_status st = run(c1, 1);
    if (st == lp_status::max_iterations) {
        res.status = st;
        return res;
    }
    double art = 0;
    for (int i = 0; i < m; ++i)
        if (basis[i] >= n) art += b[i];
    if (art > 1e-9 * std::max(1.0, bscale)) {
        res.status = lp_status::infeasible;
        return res;
    }
    // drive remaining artificials out of the basis; rows with no pivot are
    // redundant and get neutralized
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        int pc = -1;
        for (int j = 0; j < n; ++j)
            if (std::abs(T[std::size_t(i) * cols + j]) > 1e-9) {
                pc = j;
                break;
            }
        if (pc >= 0) {
            pivot(i, pc);
        } else {
            for (int j = 0; j < cols; ++j) T[std::size_t(i) * cols + j] = 0.0;
            T[std::size_t(i) * cols + basis[i]] = 1.0;
            b[i] = 0.0;
        }
    }
    for (int j = n; j < cols; ++j) allowed[j] = 0;

    // phase 2
    std::vector<double> c2(cols, 0.0);
    for (int j = 0; j < n; ++j) c2[j] = c[j];
    st = run(c2, 2);
    res.status = st;
    if (st != lp_status::optimal) return res;
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) res.x[basis[i]] = std::max(b[i], 0.0);  // squash pivot roundoff
    res.objective = 0;
    for (int j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
    return res;
}

// ------------------------------------------------------- per-index rules

struct rule_failure : error {
    using error::error;
};

template <std::size_t D> struct cell_rule {
    std::vector<vec<D>> x;
    std::vector<double> w;
    double weight_sum() const {
        double s = 0;
        for (double v : w) s += v;
        return s;
    }
};

struct rule_options {
    double c_stab = 2.0;
    std::uint64_t seed = 42;
    int max_rounds = 20;
    int scatter_per_cell = 32;  // rejection samples per cut cell per round
    double residual_tol = 1e-10;
};

// shared tensor-gauss pattern for interior indices: n points per axis per
// cell over the n^d support cells, in support-local unit coordinates
template <std::size_t D> struct interior_pattern {
    std::vector<vec<D>> x;  // in [0, n)^D
    std::vector<double> w;  // unit-cell weights, sum = n^D... times 1
};

template <std::size_t D> const interior_pattern<D>& get_interior_pattern(int n) {
    static std::map<int, interior_pattern<D>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    interior_pattern<D> p;
    const auto& g = gauss_legendre(n);
    int per_axis = n * n;
    int total = 1;
    for (std::size_t d = 0; d < D; ++d) total *= per_axis;
    for (int q = 0; q < total; ++q) {
        vec<D> x;
        double w = 1;
        int rem = q;
        for (int d = int(D) - 1; d >= 0; --d) {
            int j = rem % per_axis;
            rem /= per_axis;
            x[d] = (j / n) + 0.5 * (1.0 + g.x[j % n]);
            w *= 0.5 * g.w[j % n];
        }
        p.x.push_back(x);
        p.w.push_back(w);
    }
    return cache.emplace(n, std::move(p)).first->second;
}

template <std::size_t D>
cell_rule<D> interior_rule(const spline_space<D>& s, const idx<D>& lam) {
    const auto& p = get_interior_pattern<D>(s.n);
    cell_rule<D> r;
    r.x.resize(p.x.size());
    r.w.resize(p.w.size());
    double wscale = 1;
    for (std::size_t d = 0; d < D; ++d) wscale *= s.g.sigma;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        for (std::size_t d = 0; d < D; ++d) r.x[i][d] = (lam[d] + p.x[i][d]) * s.g.sigma;
        r.w[i] = p.w[i] * wscale;
    }
    return r;
}

// diagnostic payload for a failed construction
template <std::size_t D> struct rule_diagnostics {
    idx<D> lam{};
    int rounds = 0;
    int candidates = 0;
    int constraints = 0;
    lp_status last_status = lp_status::infeasible;
    double last_objective = 0;
    double bound = 0;
};

// LP rule for a cut index: candidates are the tensor-gauss nodes of interior
// support cells plus rejection-scattered points in cut support cells; more
// scatter is added each round until the minimal-weight rule passes the
// stability bound sum(w) <= c_stab (n sigma)^d.
template <std::size_t D>
cell_rule<D> cut_rule(const fictitious_domain<D>& fd, const spline_space<D>& s,
                      const moment_table<D>& mt, const idx<D>& lam, const rule_options& opt,
                      rule_diagnostics<D>* diag_out = nullptr) {
    const int n = s.n;
    const double sigma = s.g.sigma;
    const std::int32_t rank = s.rank_of(lam);
    assert(rank >= 0);

    // constraint rows: overlapping active mu with a nonzero domain moment
    std::vector<int> ois;
    std::vector<idx<D>> mus;
    for (std::size_t oi = 0; oi < mt.offsets.size(); ++oi) {
        idx<D> mu = lam + mt.offsets[oi];
        if (s.rank_of(mu) < 0) continue;
        ois.push_back(int(oi));
        mus.push_back(mu);
    }
    const int m_all = int(ois.size());
    std::vector<double> rhs_all(m_all);
    for (int i = 0; i < m_all; ++i) rhs_all[i] = std::max(0.0, mt.at(rank, ois[i]));

    double scale = 1;  // (n sigma)^d
    for (std::size_t d = 0; d < D; ++d) scale *= n * sigma;
    const double bound = opt.c_stab * scale;

    // a zero moment forces w = 0 wherever its pair product is positive, so
    // those rows leave the LP and instead veto candidates (this is what keeps
    // sliver indices from drowning the simplex in degenerate pivots); rows
    // below the verification tolerance get a slack column and bind only up
    // to their own size; the rest are hard equalities
    const double row_drop = 1e-12 * scale;
    std::vector<int> hard, soft;
    std::vector<idx<D>> zero_mus;
    for (int i = 0; i < m_all; ++i) {
        if (rhs_all[i] == 0.0)
            zero_mus.push_back(mus[i]);
        else if (rhs_all[i] <= row_drop)
            soft.push_back(i);
        else
            hard.push_back(i);
    }
    auto admissible = [&](const vec<D>& x) {
        for (const idx<D>& mu : zero_mus) {
            double v = 1;
            for (std::size_t d = 0; d < D; ++d) {
                v *= bspline(n, x[d] / sigma - lam[d]) * bspline(n, x[d] / sigma - mu[d]);
                if (v == 0) break;
            }
            if (v > 1e-12) return false;
        }
        return true;
    };

    // fixed candidates: gauss nodes of interior support cells
    std::vector<vec<D>> pts;
    idx<D> c0 = lam, c1;
    for (std::size_t d = 0; d < D; ++d) c1[d] = lam[d] + n;
    std::vector<idx<D>> cut_cells;
    const auto& g = gauss_legendre(n);
    for_each_multi<D>(c0, c1, [&](const idx<D>& c) {
        cell_class cl = fd.at(c);
        if (cl == cell_class::interior) {
            int total = 1;
            for (std::size_t d = 0; d < D; ++d) total *= n;
            for (int q = 0; q < total; ++q) {
                vec<D> x;
                int rem = q;
                for (int d = int(D) - 1; d >= 0; --d) {
                    int j = rem % n;
                    rem /= n;
                    x[d] = (c[d] + 0.5 * (1.0 + g.x[j])) * sigma;
                }
                if (admissible(x)) pts.push_back(x);
            }
        } else if (cl == cell_class::cut) {
            cut_cells.push_back(c);
        }
    });

    rule_diagnostics<D> diag;
    diag.lam = lam;
    diag.constraints = m_all;
    diag.bound = bound;

    if (hard.empty()) {
        // support barely grazes the domain: the empty rule matches every
        // moment to tolerance (soft rows are below it by definition)
        if (diag_out) *diag_out = diag;
        return {};
    }

    std::uint64_t key = opt.seed;
    for (std::size_t d = 0; d < D; ++d) key = rng_key(key, std::uint64_t(std::int64_t(lam[d])));
    rng_stream rng{key};
    std::uint64_t ctr = 0;

    auto scatter_box = [&](const box<D>& bb, int want) {
        int kept = 0, tries = 0;
        while (kept < want && tries < 50 * want) {
            ++tries;
            vec<D> x;
            for (std::size_t d = 0; d < D; ++d)
                x[d] = bb.lo[d] + rng.uniform(ctr++) * (bb.hi[d] - bb.lo[d]);
            if (fd.contains(x) && admissible(x)) {
                pts.push_back(x);
                ++kept;
            }
        }
    };

    const int mr = int(hard.size()) + int(soft.size());  // reduced row count
    const int ns = int(soft.size());

    lp_result lp;
    for (int round = 0; round < opt.max_rounds; ++round) {
        diag.rounds = round + 1;
        // blanket scatter in cut cells plus targeted scatter in each pair
        // support box (slivers where only a crumb of the pair support meets
        // the domain are reached far faster through the second kind)
        for (const auto& c : cut_cells) scatter_box(fd.g.cell_box(c), opt.scatter_per_cell);
        for (int i : hard) {
            box<D> pb;
            for (std::size_t d = 0; d < D; ++d) {
                pb.lo[d] = sigma * std::max(lam[d], mus[i][d]);
                pb.hi[d] = sigma * (std::min(lam[d], mus[i][d]) + n);
            }
            scatter_box(pb, 8);
        }
        const int np = int(pts.size());
        diag.candidates = np;
        if (np == 0) continue;

        // reduced constraint matrix: hard rows then soft rows; soft rows get
        // a trailing cost-free slack column each; rows scaled to unit max
        const int ncol = np + ns;
        std::vector<double> A(std::size_t(mr) * ncol, 0.0);
        std::vector<double> rhs_r(mr), cost(ncol, 0.0), rscale(mr, 1.0);
        for (int j = 0; j < np; ++j) cost[j] = 1.0;
        auto fill_row = [&](int r, int i) {
            const idx<D>& mu = mus[i];
            double rmax = 0;
            for (int j = 0; j < np; ++j) {
                double v = 1;
                for (std::size_t d = 0; d < D; ++d)
                    v *= bspline(n, pts[j][d] / sigma - lam[d]) *
                         bspline(n, pts[j][d] / sigma - mu[d]);
                A[std::size_t(r) * ncol + j] = v;
                rmax = std::max(rmax, v);
            }
            rscale[r] = rmax > 1e-300 ? 1.0 / rmax : 1.0;
            for (int j = 0; j < np; ++j) A[std::size_t(r) * ncol + j] *= rscale[r];
            rhs_r[r] = rhs_all[i] * rscale[r];
        };
        for (std::size_t r = 0; r < hard.size(); ++r) fill_row(int(r), hard[r]);
        for (int k = 0; k < ns; ++k) {
            int r = int(hard.size()) + k;
            fill_row(r, soft[k]);
            A[std::size_t(r) * ncol + np + k] = 1.0;
        }
        lp = lp_solve(mr, ncol, A, rhs_r, cost);
        diag.last_status = lp.status;
        diag.last_objective = lp.objective;
        if (lp.status == lp_status::optimal && lp.objective <= bound) {
            cell_rule<D> r;
            double resid = 0;
            std::vector<double> got(m_all, 0.0);
            for (int j = 0; j < np; ++j) {
                if (lp.x[j] <= 0.0) continue;
                r.x.push_back(pts[j]);
                r.w.push_back(lp.x[j]);
                double bl = 1;
                for (std::size_t d = 0; d < D; ++d)
                    bl *= bspline(n, pts[j][d] / sigma - lam[d]);
                for (int i = 0; i < m_all; ++i) {
                    double v = bl;
                    for (std::size_t d = 0; d < D; ++d)
                        v *= bspline(n, pts[j][d] / sigma - mus[i][d]);
                    got[i] += lp.x[j] * v;
                }
            }
            for (int i = 0; i < m_all; ++i)
                resid = std::max(resid, std::abs(got[i] - rhs_all[i]));
            if (resid <= opt.residual_tol * scale) {
                if (diag_out) *diag_out = diag;
                return r;
            }
        }
    }
    if (diag_out) *diag_out = diag;
    std::string msg = "particle rule construction failed at index (";
    for (std::size_t d = 0; d < D; ++d)
        msg += std::to_string(lam[d]) + (d + 1 < D ? "," : ")");
    msg += ": rounds=" + std::to_string(diag.rounds) +
           " candidates=" + std::to_string(diag.candidates) +
           " constraints=" + std::to_string(diag.constraints) +
           " status=" + to_string(diag.last_status) +
           " objective=" + std::to_string(diag.last_objective) +
           " bound=" + std::to_string(diag.bound);
    throw rule_failure(msg);
}

// true when every support cell of lam is interior (shared pattern applies)
template <std::size_t D>
bool support_interior(const fictitious_domain<D>& fd, const spline_space<D>& s,
                      const idx<D>& lam) {
    idx<D> c0 = lam, c1;
    for (std::size_t d = 0; d < D; ++d) c1[d] = lam[d] + s.n;
    bool all = true;
    for_each_multi<D>(c0, c1, [&](const idx<D>& c) {
        if (fd.at(c) != cell_class::interior) all = false;
    });
    return all;
}

// --------------------------------------------------------- particle field

template <std::size_t D> struct particle_field {
    std::array<std::vector<double>, D> x;
    std::vector<double> u;               // transported weights U_i
    std::vector<std::int32_t> src;       // source basis rank (diagnostics)
    std::vector<std::uint8_t> escaped;   // set by advection when flagging

    std::size_t size() const { return u.size(); }
    void append(const vec<D>& p, double w, std::int32_t s) {
        for (std::size_t d = 0; d < D; ++d) x[d].push_back(p[d]);
        u.push_back(w);
        src.push_back(s);
    }
    double weight_sum() const {
        double s = 0;
        for (double v : u) s += v;
        return s;
    }
};

// particles for the spline sum(c_lam b_lam): each index contributes its rule
// nodes with weights U_i = w_i c_lam b_lam(x_i); rules for distinct indices
// are kept separate (coincident nodes stay duplicated).
template <std::size_t D>
particle_field<D> particles_from_spline(const fictitious_domain<D>& fd,
                                        const spline_field<D>& f, const moment_table<D>& mt,
                                        const rule_options& opt = {}) {
    const auto& s = *f.space;
    particle_field<D> out;
    for (std::int32_t rank = 0; rank < s.count(); ++rank) {
        const idx<D>& lam = s.lam[rank];
        cell_rule<D> r = support_interior(fd, s, lam)
                             ? interior_rule(s, lam)
                             : cut_rule(fd, s, mt, lam, opt);
        double c = f.c[rank];
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            double b = 1;
            for (std::size_t d = 0; d < D; ++d)
                b *= bspline(s.n, r.x[i][d] / s.g.sigma - lam[d]);
            out.append(r.x[i], r.w[i] * c * b, rank);
        }
    }
    return out;
}

template <std::size_t D>
void write_particles_csv(std::ostream& os, const particle_field<D>& p) {
    os.precision(17);
    for (std::size_t d = 0; d < D; ++d) os << "x" << d + 1 << ",";
    os << "u,src,escaped\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t d = 0; d < D; ++d) os << p.x[d][i] << ",";
        os << p.u[i] << "," << p.src[i] << ","
           << (i < p.escaped.size() ? int(p.escaped[i]) : 0) << "\n";
    }
}

}  // namespace pmreg
