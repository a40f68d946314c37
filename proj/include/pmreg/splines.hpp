#pragma once

// cardinal b-splines of order n (degree n-1, support [0,n], C^{n-2}) on the
// scaled lattice, the active index set over a cell union, spline fields with
// point/derivative evaluation, a local least-squares quasi-interpolant, cell
// norms, two-scale refinement and serialization.

#include <functional>
#include <map>
#include <memory>

#include <Eigen/Dense>

#include "pmreg/grid.hpp"

namespace pmreg {

inline constexpr int max_spline_order = 10;

namespace detail {

struct bspline_tables {
    // piece[n][r][s]: local polynomial of d^r b^n on span [s, s+1)
    std::vector<std::vector<std::vector<poly>>> piece;
    std::vector<std::vector<poly>> anti;  // antiderivative pieces per n (tail 1)
};

inline const bspline_tables& btab() {
    static const bspline_tables t = [] {
        bspline_tables t;
        t.piece.resize(max_spline_order + 1);
        t.anti.resize(max_spline_order + 1);
        std::vector<piecewise_poly> pp(max_spline_order + 1);
        pp[1].breaks = {0.0, 1.0};
        pp[1].pieces = {poly({1.0})};
        for (int n = 2; n <= max_spline_order; ++n) {
            // b^n(x) = x/(n-1) b^{n-1}(x) + (n-x)/(n-1) b^{n-1}(x-1)
            piecewise_poly r;
            for (int s = 0; s <= n; ++s) r.breaks.push_back(double(s));
            for (int s = 0; s < n; ++s) {
                poly p({0.0});
                if (s <= n - 2) p = p + poly({double(s) / (n - 1), 1.0 / (n - 1)}) * pp[n - 1].pieces[s];
                if (s >= 1) p = p + poly({double(n - s) / (n - 1), -1.0 / (n - 1)}) * pp[n - 1].pieces[s - 1];
                r.pieces.push_back(p);
            }
            pp[n] = r;
        }
        for (int n = 1; n <= max_spline_order; ++n) {
            t.piece[n].resize(n);
            piecewise_poly cur = pp[n];
            for (int r = 0; r < n; ++r) {
                t.piece[n][r] = cur.pieces;
                cur = cur.derivative();
            }
            t.anti[n] = pp[n].antiderivative().pieces;
        }
        return t;
    }();
    return t;
}

}  // namespace detail

// r-th derivative of the order-n cardinal b-spline; derivatives of order
// >= n are distributional and reported as the zero function
inline double bspline(int n, double x, int r = 0) {
    assert(n >= 1 && n <= max_spline_order && r >= 0);
    if (r >= n) return 0.0;
    if (x < 0.0 || x >= double(n)) return 0.0;
    int s = int(x);
    return detail::btab().piece[n][r][s](x - s);
}

inline constexpr bool bspline_deriv_vanishes(int n, int r) { return r >= n; }

// int_{-inf}^x b^n; 0 below the support, 1 above it
inline double bspline_antideriv(int n, double x) {
    assert(n >= 1 && n <= max_spline_order);
    if (x <= 0.0) return 0.0;
    if (x >= double(n)) return 1.0;
    int s = int(x);
    return detail::btab().anti[n][s](x - s);
}

// b^n(x) = sum_j subdivision_coef(n, j) b^n(2x - j), j = 0..n
inline double subdivision_coef(int n, int j) {
    return std::ldexp(double(binom(n, j)), 1 - n);
}

// jump of the (n-1)st derivative of b^n at integer knot j (0..n)
inline double bspline_top_jump(int n, int j) {
    if (j < 0 || j > n) return 0.0;
    return (j % 2 == 0 ? 1.0 : -1.0) * double(binom(n, j));
}

// ------------------------------------------------------------ spline space
// active indices over a cell union: lambda is active iff the support box
// [lambda, lambda + n) of cells meets the union; dense lexicographic ranks.

template <std::size_t D> struct spline_space {
    grid<D> g;
    int n = 3;
    idx<D> llo{}, lhi{};             // lambda lattice [llo, lhi)
    std::vector<std::int32_t> rank_;  // per lattice point, -1 when inactive
    std::vector<idx<D>> lam;          // rank -> lambda

    double sigma() const { return g.sigma; }
    int count() const { return int(lam.size()); }

    std::int64_t lattice_size() const {
        std::int64_t s = 1;
        for (int d = 0; d < D; ++d) s *= lhi[d] - llo[d];
        return s;
    }
    std::int64_t lattice_lin(const idx<D>& l) const {
        std::int64_t r = 0;
        for (int d = 0; d < D; ++d) r = r * (lhi[d] - llo[d]) + (l[d] - llo[d]);
        return r;
    }
    bool in_lattice(const idx<D>& l) const {
        for (int d = 0; d < D; ++d)
            if (l[d] < llo[d] || l[d] >= lhi[d]) return false;
        return true;
    }
    std::int32_t rank_of(const idx<D>& l) const {
        return in_lattice(l) ? rank_[lattice_lin(l)] : -1;
    }
    // support box of b_lambda in physical coordinates
    box<D> support(const idx<D>& l) const {
        box<D> b;
        for (int d = 0; d < D; ++d) {
            b.lo[d] = l[d] * g.sigma;
            b.hi[d] = (l[d] + n) * g.sigma;
        }
        return b;
    }
};

namespace detail {
template <std::size_t D> void init_lattice(spline_space<D>& s) {
    for (int d = 0; d < D; ++d) {
        s.llo[d] = s.g.lo[d] - s.n + 1;
        s.lhi[d] = s.g.hi[d];
    }
    s.rank_.assign(s.lattice_size(), -1);
}
template <std::size_t D> void renumber(spline_space<D>& s, const std::vector<std::uint8_t>& active) {
    s.lam.clear();
    std::int64_t lin = 0;
    for_each_multi<D>(s.llo, s.lhi, [&](const idx<D>& l) {
        if (active[lin]) {
            s.rank_[lin] = std::int32_t(s.lam.size());
            s.lam.push_back(l);
        }
        ++lin;
    });
}
}  // namespace detail

// indices whose support meets the cell union of the fictitious domain (the
// same set as "support meets the domain with positive measure")
template <std::size_t D>
std::shared_ptr<const spline_space<D>> make_space(const fictitious_domain<D>& fd, int n) {
    if (n < 2 || n > max_spline_order) throw error("spline order n out of range");
    auto s = std::make_shared<spline_space<D>>();
    s->g = fd.g;
    s->n = n;
    detail::init_lattice(*s);
    std::vector<std::uint8_t> active(s->lattice_size(), 0);
    for_each_multi<D>(fd.g.lo, fd.g.hi, [&](const idx<D>& c) {
        if (fd.at(c) == cell_class::outside) return;
        idx<D> l0, l1;
        for (int d = 0; d < D; ++d) {
            l0[d] = c[d] - n + 1;
            l1[d] = c[d] + 1;
        }
        for_each_multi<D>(l0, l1, [&](const idx<D>& l) { active[s->lattice_lin(l)] = 1; });
    });
    detail::renumber(*s, active);
    return s;
}

// every lattice index active (whole-window space; used by refinement)
template <std::size_t D> std::shared_ptr<const spline_space<D>> full_space(const grid<D>& g, int n) {
    auto s = std::make_shared<spline_space<D>>();
    s->g = g;
    s->n = n;
    detail::init_lattice(*s);
    std::vector<std::uint8_t> active(s->lattice_size(), 1);
    detail::renumber(*s, active);
    return s;
}

template <std::size_t D> struct spline_field {
    std::shared_ptr<const spline_space<D>> space;
    std::vector<double> c;

    spline_field() = default;
    explicit spline_field(std::shared_ptr<const spline_space<D>> s)
        : space(std::move(s)), c(space->count(), 0.0) {}
};

// visit the active basis functions at x: f(rank, product of per-axis factors).
// alpha = derivative multi-index; factors carry the sigma^{-alpha} scaling.
template <std::size_t D, class F>
inline void for_each_active(const spline_space<D>& s, const vec<D>& x, const idx<D>& alpha,
                            F&& f) {
    const int n = s.n;
    const auto& tab = detail::btab();
    idx<D> cell;
    double bv[D][max_spline_order];
    for (int d = 0; d < D; ++d) {
        double u = x[d] / s.g.sigma;
        double fl = std::floor(u);
        cell[d] = int(fl);
        if (cell[d] < s.g.lo[d] || cell[d] >= s.g.hi[d]) return;
        double t = u - fl;
        int r = alpha[d];
        double scale = r > 0 ? std::pow(s.g.sigma, -double(r)) : 1.0;
        for (int j = 0; j < n; ++j) {
            // lambda = cell - n + 1 + j sees local span s = n - 1 - j
            bv[d][j] = r >= n ? 0.0 : scale * tab.piece[n][r][n - 1 - j](t);
        }
    }
    idx<D> j{};
    while (true) {
        idx<D> l;
        double v = 1;
        for (int d = 0; d < D; ++d) {
            l[d] = cell[d] - n + 1 + j[d];
            v *= bv[d][j[d]];
        }
        std::int32_t r = s.rank_of(l);
        if (r >= 0 && v != 0.0) f(r, v);
        int d = D - 1;
        while (d >= 0) {
            if (++j[d] < n) break;
            j[d] = 0;
            --d;
        }
        if (d < 0) return;
    }
}

// point evaluation of derivative alpha; zero outside the grid window (the
// optional flag reports that case)
template <std::size_t D>
double eval_field(const spline_field<D>& f, const vec<D>& x, const idx<D>& alpha = idx<D>{},
                  bool* in_window = nullptr) {
    const auto& s = *f.space;
    for (int d = 0; d < D; ++d) {
        double u = x[d] / s.g.sigma;
        if (u < s.g.lo[d] || u >= s.g.hi[d]) {
            if (in_window) *in_window = false;
            return 0.0;
        }
    }
    if (in_window) *in_window = true;
    double acc = 0;
    for_each_active(s, x, alpha, [&](std::int32_t r, double v) { acc += f.c[r] * v; });
    return acc;
}

// ------------------------------------------------- local quasi-interpolant
// coefficient lambda = dual-weight dot of f against the basis functions
// overlapping supp b_lambda, i.e. the lambda-component of the local L2
// projection onto splines restricted to the n^d-cell support box. projection
// on V, reproduces Q_{n-1}, depends on f only inside supp b_lambda.

namespace detail {

struct qi_pattern {
    int n = 0;
    std::vector<double> gauss_t, gauss_w;     // n-point rule on [0,1)
    std::vector<std::vector<double>> bvals;   // [offset p + n-1][sample]: b(t - p) per axis
    std::vector<double> dual;                 // (2n-1)^d weights for the center row
};

// 1d local gram over [0, n]: g(p, q) = int b(t-p) b(t-q), offsets -(n-1)..n-1
inline std::vector<double> qi_gram_1d(int n) {
    const int m = 2 * n - 1;
    std::vector<double> g(m * m, 0.0);
    const auto& tab = btab();
    piecewise_poly b;
    b.breaks.resize(n + 1);
    for (int s = 0; s <= n; ++s) b.breaks[s] = s;
    b.pieces = tab.piece[n][0];
    for (int a = 0; a < m; ++a)
        for (int c = 0; c < m; ++c) {
            piecewise_poly pa = b.compose_affine(double(-(a - (n - 1))), 1.0);
            piecewise_poly pc = b.compose_affine(double(-(c - (n - 1))), 1.0);
            g[a * m + c] = (pa * pc).integral(0.0, double(n));
        }
    return g;
}

inline const qi_pattern& qi_tables(int n, int dim) {
    static std::map<std::pair<int, int>, qi_pattern> cache;
    auto key = std::make_pair(n, dim);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    qi_pattern p;
    p.n = n;
    const auto& g = gauss_legendre(n);
    p.gauss_t.resize(n);
    p.gauss_w.resize(n);
    for (int i = 0; i < n; ++i) {
        p.gauss_t[i] = 0.5 * (1.0 + g.x[i]);
        p.gauss_w[i] = 0.5 * g.w[i];
    }
    const int m = 2 * n - 1;
    p.bvals.assign(m, std::vector<double>(n * n));
    for (int o = 0; o < m; ++o)
        for (int cell = 0; cell < n; ++cell)
            for (int gp = 0; gp < n; ++gp)
                p.bvals[o][cell * n + gp] =
                    bspline(n, cell + p.gauss_t[gp] - double(o - (n - 1)));

    std::vector<double> g1 = qi_gram_1d(n);
    int sz = 1;
    for (int d = 0; d < dim; ++d) sz *= m;
    Eigen::MatrixXd G(sz, sz);
    std::vector<int> oa(dim), ob(dim);
    for (int a = 0; a < sz; ++a) {
        int ra = a;
        for (int d = dim - 1; d >= 0; --d) {
            oa[d] = ra % m;
            ra /= m;
        }
        for (int b = 0; b < sz; ++b) {
            int rb = b;
            for (int d = dim - 1; d >= 0; --d) {
                ob[d] = rb % m;
                rb /= m;
            }
            double v = 1;
            for (int d = 0; d < dim; ++d) v *= g1[oa[d] * m + ob[d]];
            G(a, b) = v;
        }
    }
    Eigen::VectorXd e = Eigen::VectorXd::Zero(sz);
    e[(sz - 1) / 2] = 1.0;  // center offset on every axis
    Eigen::VectorXd dual = G.ldlt().solve(e);
    p.dual.assign(dual.data(), dual.data() + sz);
    return cache.emplace(key, std::move(p)).first->second;
}

}  // namespace detail

template <std::size_t D> spline_field<D> quasi_interpolate(std::shared_ptr<const spline_space<D>> space,
                                                   const std::function<double(vec<D>)>& f) {
    const auto& s = *space;
    const int n = s.n;
    const auto& pat = detail::qi_tables(n, D);
    const int m = 2 * n - 1;
    const int nsamp = n * n;  // per axis: n cells x n gauss points
    spline_field<D> out(space);

    std::vector<double> fval;
    std::vector<double> rhs;
    for (int rank = 0; rank < s.count(); ++rank) {
        const idx<D>& l = s.lam[rank];
        // tensor samples over supp b_lambda
        int total = 1;
        for (int d = 0; d < D; ++d) total *= nsamp;
        fval.resize(total);
        idx<D> js{};
        for (int q = 0; q < total; ++q) {
            vec<D> x;
            int rem = q;
            for (int d = D - 1; d >= 0; --d) {
                js[d] = rem % nsamp;
                rem /= nsamp;
            }
            for (int d = 0; d < D; ++d) {
                int cell = js[d] / n, gp = js[d] % n;
                x[d] = (l[d] + cell + pat.gauss_t[gp]) * s.g.sigma;
            }
            fval[q] = f(x);
        }
        // rhs_o = sum_q w_q f_q prod_d b(t_q - o_d); dual dot gives the coefficient
        rhs.assign(pat.dual.size(), 0.0);
        std::vector<int> off(D);
        for (std::size_t o = 0; o < rhs.size(); ++o) {
            std::size_t rem = o;
            for (int d = D - 1; d >= 0; --d) {
                off[d] = int(rem % m);
                rem /= m;
            }
            double acc = 0;
            for (int q = 0; q < total; ++q) {
                int rq = q;
                double v = 1;
                for (int d = D - 1; d >= 0; --d) {
                    int jd = rq % nsamp;
                    rq /= nsamp;
                    v *= pat.bvals[off[d]][jd] * pat.gauss_w[jd % n];
                }
                acc += v * fval[q];
            }
            rhs[o] = acc;
        }
        double c = 0;
        for (std::size_t o = 0; o < rhs.size(); ++o) c += pat.dual[o] * rhs[o];
        out.c[rank] = c;
    }
    return out;
}

// ------------------------------------------------------------------- norms

namespace detail {
template <std::size_t D> void multi_indices_upto(int l, std::vector<idx<D>>& out) {
    idx<D> a{};
    out.clear();
    std::function<void(int, int)> rec = [&](int d, int left) {
        if (d == D) {
            out.push_back(a);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            a[d] = v;
            rec(d + 1, left - v);
        }
    };
    rec(0, l);
}
}  // namespace detail

// W^{l,p} norm of the field over a list of whole cells. finite p uses n-point
// tensor gauss per cell (exact for the piecewise-polynomial integrands at
// p = 2); p = inf takes the max over gauss points and cell corners.
template <std::size_t D>
double field_norm(const spline_field<D>& f, const std::vector<idx<D>>& cells, int l, double p) {
    const auto& s = *f.space;
    const int n = s.n;
    std::vector<idx<D>> alphas;
    detail::multi_indices_upto<D>(l, alphas);
    const auto& g = gauss_legendre(n);
    const bool inf = std::isinf(p);
    double acc = 0;
    std::vector<vec<D>> pts;
    for (const auto& c : cells) {
        box<D> b = s.g.cell_box(c);
        pts.clear();
        if (inf) {
            // corners
            idx<D> j{};
            for (int q = 0; q < (1 << D); ++q) {
                vec<D> x;
                for (int d = 0; d < D; ++d) x[d] = (q >> d) & 1 ? b.hi[d] : b.lo[d];
                pts.push_back(x);
            }
        }
        int total = 1;
        for (int d = 0; d < D; ++d) total *= n;
        for (int q = 0; q < total; ++q) {
            vec<D> x;
            double w = 1;
            int rem = q;
            for (int d = D - 1; d >= 0; --d) {
                int jd = rem % n;
                rem /= n;
                x[d] = 0.5 * (b.lo[d] + b.hi[d]) + 0.5 * (b.hi[d] - b.lo[d]) * g.x[jd];
                w *= 0.5 * (b.hi[d] - b.lo[d]) * g.w[jd];
            }
            if (inf) {
                pts.push_back(x);
            } else {
                for (const auto& a : alphas) {
                    double v = eval_field(f, x, a);
                    acc += w * std::pow(std::abs(v), p);
                }
            }
        }
        if (inf) {
            for (const auto& x : pts)
                for (const auto& a : alphas) acc = std::max(acc, std::abs(eval_field(f, x, a)));
        }
    }
    return inf ? acc : std::pow(acc, 1.0 / p);
}

template <std::size_t D> std::vector<idx<D>> omega_sigma_cells(const fictitious_domain<D>& fd) {
    std::vector<idx<D>> r;
    for_each_multi<D>(fd.g.lo, fd.g.hi, [&](const idx<D>& c) {
        if (fd.at(c) != cell_class::outside) r.push_back(c);
    });
    return r;
}

// --------------------------------------------------------------- refinement
// one dyadic step: b(x/s - l) = sum_j 2^{1-n} C(n,j) b(2x/s - 2l - j); the
// refined window is enlarged so every child index fits.

template <std::size_t D> spline_field<D> two_scale_refine_once(const spline_field<D>& f) {
    const auto& s = *f.space;
    const int n = s.n;
    grid<D> g2;
    g2.sigma = 0.5 * s.g.sigma;
    for (int d = 0; d < D; ++d) {
        g2.lo[d] = 2 * s.g.lo[d] - n + 1;
        g2.hi[d] = 2 * s.g.hi[d] + n - 1;
    }
    auto space2 = full_space(g2, n);
    spline_field<D> out(space2);
    std::vector<double> sc(n + 1);
    for (int j = 0; j <= n; ++j) sc[j] = subdivision_coef(n, j);
    for (int rank = 0; rank < s.count(); ++rank) {
        double cv = f.c[rank];
        if (cv == 0.0) continue;
        const idx<D>& l = s.lam[rank];
        idx<D> j{};
        while (true) {
            idx<D> l2;
            double w = cv;
            for (int d = 0; d < D; ++d) {
                l2[d] = 2 * l[d] + j[d];
                w *= sc[j[d]];
            }
            std::int32_t r2 = space2->rank_of(l2);
            assert(r2 >= 0);
            out.c[r2] += w;
            int d = D - 1;
            while (d >= 0) {
                if (++j[d] <= n) break;
                j[d] = 0;
                --d;
            }
            if (d < 0) break;
        }
    }
    return out;
}

template <std::size_t D> spline_field<D> two_scale_refine(spline_field<D> f, int k) {
    for (int i = 0; i < k; ++i) f = two_scale_refine_once(f);
    return f;
}

// copy coefficients onto another space on the same grid scale (missing -> 0)
template <std::size_t D>
spline_field<D> restrict_field(const spline_field<D>& f,
                               std::shared_ptr<const spline_space<D>> target) {
    spline_field<D> out(target);
    for (int r = 0; r < target->count(); ++r) {
        std::int32_t src = f.space->rank_of(target->lam[r]);
        if (src >= 0) out.c[r] = f.c[src];
    }
    return out;
}

// ---------------------------------------------------------------- file io
// "PMSF" v1: u32 dim, u32 n, f64 sigma, i32 window lo/hi per axis, u64 count,
// then per rank the lambda multi-index (i32 per axis), then count f64 coeffs.

template <std::size_t D> void write_field(std::ostream& os, const spline_field<D>& f) {
    const auto& s = *f.space;
    os.write("PMSF", 4);
    write_pod<std::uint32_t>(os, 1);
    write_pod<std::uint32_t>(os, D);
    write_pod<std::uint32_t>(os, s.n);
    write_pod<double>(os, s.g.sigma);
    for (int d = 0; d < D; ++d) {
        write_pod<std::int32_t>(os, s.g.lo[d]);
        write_pod<std::int32_t>(os, s.g.hi[d]);
    }
    write_pod<std::uint64_t>(os, f.c.size());
    for (const auto& l : s.lam)
        for (int d = 0; d < D; ++d) write_pod<std::int32_t>(os, l[d]);
    for (double v : f.c) write_pod<double>(os, v);
}

template <std::size_t D> spline_field<D> read_field(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "PMSF") throw error("not a spline field file");
    if (read_pod<std::uint32_t>(is) != 1) throw error("unsupported field file version");
    if (read_pod<std::uint32_t>(is) != std::uint32_t(D))
        throw error("field file dimension mismatch");
    auto s = std::make_shared<spline_space<D>>();
    s->n = int(read_pod<std::uint32_t>(is));
    s->g.sigma = read_pod<double>(is);
    for (int d = 0; d < D; ++d) {
        s->g.lo[d] = read_pod<std::int32_t>(is);
        s->g.hi[d] = read_pod<std::int32_t>(is);
    }
    detail::init_lattice(*s);
    std::uint64_t count = read_pod<std::uint64_t>(is);
    s->lam.resize(count);
    for (auto& l : s->lam)
        for (int d = 0; d < D; ++d) l[d] = read_pod<std::int32_t>(is);
    for (std::uint64_t r = 0; r < count; ++r) {
        if (!s->in_lattice(s->lam[r])) throw error("field file index outside window");
        s->rank_[s->lattice_lin(s->lam[r])] = std::int32_t(r);
    }
    spline_field<D> f;
    f.space = s;
    f.c.resize(count);
    for (auto& v : f.c) v = read_pod<double>(is);
    return f;
}

// plotting export: per-cell tensor samples "x...,value"
template <std::size_t D>
void export_field_csv(const spline_field<D>& f, std::ostream& os, int per_axis = 3) {
    const auto& s = *f.space;
    os.precision(17);
    for (int d = 0; d < D; ++d) os << "x" << d + 1 << ",";
    os << "value\n";
    for_each_multi<D>(s.g.lo, s.g.hi, [&](const idx<D>& c) {
        box<D> b = s.g.cell_box(c);
        idx<D> j{};
        int total = 1;
        for (int d = 0; d < D; ++d) total *= per_axis;
        for (int q = 0; q < total; ++q) {
            int rem = q;
            vec<D> x;
            for (int d = D - 1; d >= 0; --d) {
                int jd = rem % per_axis;
                rem /= per_axis;
                x[d] = b.lo[d] + (jd + 0.5) / per_axis * (b.hi[d] - b.lo[d]);
            }
            for (int d = 0; d < D; ++d) os << x[d] << ",";
            os << eval_field(f, x) << "\n";
        }
    });
}

}  // namespace pmreg
