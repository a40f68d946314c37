#pragma once

// exact moments int_Omega b_lambda b_mu: closed-form tensor values when the
// pair's support lies inside the domain, otherwise a divergence-theorem
// reduction to one support-box face plus the boundary facets crossing the
// support. results are collected in a banded per-index table with binary
// caching keyed by mesh hash, scale, order and window.

#include <optional>

#include "pmreg/integrate.hpp"
#include "pmreg/splines.hpp"

namespace pmreg {

namespace detail {
inline piecewise_poly bspline_pp(int n) {
    piecewise_poly p;
    p.breaks.resize(n + 1);
    for (int s = 0; s <= n; ++s) p.breaks[s] = s;
    p.pieces = btab().piece[n][0];
    return p;
}
// product b(u - a) b(u - b) on the unit lattice as a piecewise polynomial
inline piecewise_poly bspline_pair_pp(int n, int a, int b) {
    piecewise_poly base = bspline_pp(n);
    return base.compose_affine(double(-a), 1.0) * base.compose_affine(double(-b), 1.0);
}
}  // namespace detail

// int b^n(u) b^n(u - r) du over the line; zero when |r| >= n
inline double moment1(int n, int r) {
    r = std::abs(r);
    if (r >= n) return 0.0;
    static std::map<std::pair<int, int>, double> cache;
    auto key = std::make_pair(n, r);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    double v = detail::bspline_pair_pp(n, 0, r).integral();
    cache.emplace(key, v);
    return v;
}

// single-span factor int_0^1 b^n(s + p) b^n(s + q) ds; zero outside 0..n-1
inline double span_product(int n, int p, int q) {
    if (p < 0 || p >= n || q < 0 || q >= n) return 0.0;
    static std::map<std::array<int, 3>, double> cache;
    std::array<int, 3> key{n, p, q};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const auto& tab = detail::btab();
    double v = (tab.piece[n][0][p] * tab.piece[n][0][q]).antiderivative()(1.0);
    cache.emplace(key, v);
    return v;
}

// full-space tensor moment in physical units
template <std::size_t D> double fullspace_moment(int n, double sigma, const idx<D>& offset) {
    double v = 1;
    for (int d = 0; d < D; ++d) v *= moment1(n, offset[d]);
    for (int d = 0; d < D; ++d) v *= sigma;
    return v;
}

inline double cut_moment(const boundary_mesh<1>& m, double sigma, int n, const idx<1>& lam,
                         const idx<1>& mu, int /*points_per_facet*/ = 0) {
    if (std::abs(mu[0] - lam[0]) >= n) return 0.0;
    piecewise_poly p = detail::bspline_pair_pp(n, lam[0], mu[0]);
    double lo = std::max(double(std::max(lam[0], mu[0])), m.a / sigma);
    double hi = std::min(double(std::min(lam[0], mu[0]) + n), m.b / sigma);
    if (hi <= lo) return 0.0;
    return sigma * p.integral(lo, hi);
}

// divergence-theorem moment for a cut pair: with F = (A0(x1) p1(x2), 0) and
// div F = b_lam b_mu, the integral over Omega cap S reduces to the high-x1
// face of the support box S plus the boundary facets inside S. the low face
// vanishes (A0 starts at the support) and x2-normal faces carry no flux.
inline double cut_moment(const boundary_mesh<2>& m, double sigma, int n, const idx<2>& lam,
                         const idx<2>& mu, int points_per_facet = 0) {
    idx<2> off{mu[0] - lam[0], mu[1] - lam[1]};
    if (std::abs(off[0]) >= n || std::abs(off[1]) >= n) return 0.0;
    if (points_per_facet <= 0) points_per_facet = n;

    double lo_u[2], hi_u[2];
    for (int d = 0; d < 2; ++d) {
        lo_u[d] = double(std::max(lam[d], mu[d]));
        hi_u[d] = double(std::min(lam[d], mu[d]) + n);
    }
    piecewise_poly a0 = detail::bspline_pair_pp(n, lam[0], mu[0]).antiderivative();
    piecewise_poly p1 = detail::bspline_pair_pp(n, lam[1], mu[1]);
    piecewise_poly a1 = p1.antiderivative();

    box<2> S{{lo_u[0] * sigma, lo_u[1] * sigma}, {hi_u[0] * sigma, hi_u[1] * sigma}};
    double total = 0;

    // high-x1 face: constant A0 tail times the tangential integral over the
    // portions of the face inside the domain; probe points are nudged inward
    // so a boundary running along the face classifies consistently
    {
        vec<2> fa{S.hi[0], S.lo[1]}, fb{S.hi[0], S.hi[1]};
        vec<2> nudge{-1e-9 * sigma, 0.0};
        double a0_tail = a0(hi_u[0]);
        for (auto [t0, t1] : segment_in_domain(m, fa, fb, nudge)) {
            double u0 = (S.lo[1] + t0 * (S.hi[1] - S.lo[1])) / sigma;
            double u1 = (S.lo[1] + t1 * (S.hi[1] - S.lo[1])) / sigma;
            total += sigma * a0_tail * sigma * (a1(u1) - a1(u0));
        }
    }

    // boundary facets inside S, skipping pieces coincident with the high face
    // (the face term above already accounts for them)
    double co_tol = 1e-12 * (S.hi[0] - S.lo[0]);
    int npts = points_per_facet + n - 1;
    const auto& gr = gauss_legendre(npts);
    for (const auto& piece : boundary_in_box(m, S)) {
        if (std::abs(piece.a[0] - S.hi[0]) < co_tol && std::abs(piece.b[0] - S.hi[0]) < co_tol)
            continue;
        if (piece.n[0] == 0.0) continue;  // no x1-flux through horizontal pieces
        double len = norm2(piece.b - piece.a);
        if (len == 0.0) continue;
        // split at knot-line crossings so each sub-arc sees one polynomial
        std::vector<double> ts{0.0, 1.0};
        for (int d = 0; d < 2; ++d) {
            double pa = piece.a[d] / sigma, pb = piece.b[d] / sigma;
            if (pa == pb) continue;
            for (int k = int(std::ceil(std::min(pa, pb))); k <= int(std::floor(std::max(pa, pb))); ++k) {
                double t = (double(k) - pa) / (pb - pa);
                if (t > 1e-13 && t < 1.0 - 1e-13) ts.push_back(t);
            }
        }
        std::sort(ts.begin(), ts.end());
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            double t0 = ts[i], t1 = ts[i + 1];
            if (t1 - t0 < 1e-14) continue;
            for (int q = 0; q < npts; ++q) {
                double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gr.x[q];
                double w = 0.5 * (t1 - t0) * gr.w[q] * len;
                vec<2> x = piece.a + t * (piece.b - piece.a);
                total += w * piece.n[0] * sigma * a0(x[0] / sigma) * p1(x[1] / sigma);
            }
        }
    }
    return total;
}

// fallback for degenerate boundary configurations: clip each support cell and
// integrate the (per-cell polynomial) pair product over the triangle fan
template <std::size_t D>
double cut_moment_cellwise(const fictitious_domain<D>& fd, int n, const idx<D>& lam,
                           const idx<D>& mu) {
    double sigma = fd.g.sigma;
    idx<D> clo, chi;
    for (int d = 0; d < D; ++d) {
        if (std::abs(mu[d] - lam[d]) >= n) return 0.0;
        clo[d] = std::max(lam[d], mu[d]);
        chi[d] = std::min(lam[d], mu[d]) + n;
    }
    auto f = [&](const vec<D>& x) {
        double v = 1;
        for (int d = 0; d < D; ++d)
            v *= bspline(n, x[d] / sigma - lam[d]) * bspline(n, x[d] / sigma - mu[d]);
        return v;
    };
    double acc = 0;
    for_each_multi<D>(clo, chi,
                      [&](const idx<D>& c) { acc += integrate_cell_domain(fd, c, f, 2 * n); });
    return acc;
}

// ------------------------------------------------------------ moment table

template <std::size_t D> struct moment_table {
    std::shared_ptr<const spline_space<D>> space;
    int points_per_facet = 0;
    std::vector<idx<D>> offsets;  // lexicographic over [-(n-1), n-1]^D
    std::vector<double> val;      // space->count() x offsets.size(), row-major
    std::int64_t cut_pairs = 0;
    int fallbacks = 0;

    int band() const { return 2 * space->n - 1; }
    int offset_index(const idx<D>& o) const {
        int r = 0;
        for (int d = 0; d < D; ++d) {
            int v = o[d] + space->n - 1;
            if (v < 0 || v >= band()) return -1;
            r = r * band() + v;
        }
        return r;
    }
    double at(int rank, int oi) const { return val[std::size_t(rank) * offsets.size() + oi]; }
};

template <std::size_t D>
moment_table<D> build_moment_table(const fictitious_domain<D>& fd,
                                   std::shared_ptr<const spline_space<D>> space,
                                   int points_per_facet = 0,
                                   std::vector<std::string>* warnings = nullptr) {
    const int n = space->n;
    const double sigma = space->g.sigma;
    if (points_per_facet <= 0) points_per_facet = n;
    moment_table<D> t;
    t.space = space;
    t.points_per_facet = points_per_facet;
    idx<D> olo, ohi;
    for (int d = 0; d < D; ++d) {
        olo[d] = -(n - 1);
        ohi[d] = n;
    }
    for_each_multi<D>(olo, ohi, [&](const idx<D>& o) { t.offsets.push_back(o); });
    const std::size_t nb = t.offsets.size();
    t.val.assign(std::size_t(space->count()) * nb, 0.0);

    std::vector<double> full(nb);
    for (std::size_t oi = 0; oi < nb; ++oi)
        full[oi] = fullspace_moment<D>(n, sigma, t.offsets[oi]);

    double neg_floor = -1e-12;
    for (int d = 0; d < D; ++d) neg_floor *= sigma;

    for (int rank = 0; rank < space->count(); ++rank) {
        const idx<D>& lam = space->lam[rank];
        bool supp_interior = true;
        {
            idx<D> c0 = lam, c1;
            for (int d = 0; d < D; ++d) c1[d] = lam[d] + n;
            for_each_multi<D>(c0, c1, [&](const idx<D>& c) {
                if (fd.at(c) != cell_class::interior) supp_interior = false;
            });
        }
        for (std::size_t oi = 0; oi < nb; ++oi) {
            const idx<D>& o = t.offsets[oi];
            bool fwd = false;  // compute each unordered pair once, mirror the other half
            for (int d = 0; d < D; ++d) {
                if (o[d] > 0) { fwd = true; break; }
                if (o[d] < 0) break;
                if (d == D - 1) fwd = true;  // o == 0
            }
            if (!fwd) continue;
            idx<D> mu = lam + o;
            std::int32_t mr = space->rank_of(mu);
            if (mr < 0) continue;
            double v;
            if (supp_interior) {
                v = full[oi];
            } else {
                bool pair_interior = true;
                idx<D> c0, c1;
                for (int d = 0; d < D; ++d) {
                    c0[d] = std::max(lam[d], mu[d]);
                    c1[d] = std::min(lam[d], mu[d]) + n;
                }
                for_each_multi<D>(c0, c1, [&](const idx<D>& c) {
                    if (fd.at(c) != cell_class::interior) pair_interior = false;
                });
                if (pair_interior) {
                    v = full[oi];
                } else {
                    ++t.cut_pairs;
                    bool bad = false;
                    try {
                        v = cut_moment(fd.mesh, sigma, n, lam, mu, points_per_facet);
                    } catch (const std::exception&) {
                        bad = true;
                        v = 0;
                    }
                    // the integrand is nonnegative, so a genuinely negative
                    // result means the boundary reduction misclassified a
                    // sliver; redo the pair cellwise
                    if (!bad && (!std::isfinite(v) || v < neg_floor)) bad = true;
                    if (bad) {
                        v = cut_moment_cellwise(fd, n, lam, mu);
                        ++t.fallbacks;
                        if (warnings)
                            warnings->push_back("moment fallback at rank " + std::to_string(rank) +
                                                " offset " + std::to_string(int(oi)));
                    }
                    if (v < 0.0) v = 0.0;
                }
            }
            t.val[std::size_t(rank) * nb + oi] = v;
            if (mr != rank) {
                idx<D> no;
                for (int d = 0; d < D; ++d) no[d] = -o[d];
                t.val[std::size_t(mr) * nb + t.offset_index(no)] = v;
            }
        }
    }
    return t;
}

// ---------------------------------------------------------------- caching
// "PMMT" v1, keyed by (mesh hash, sigma, n, window, facet points)

template <std::size_t D>
void write_moment_table(std::ostream& os, const moment_table<D>& t, std::uint64_t mesh_hash) {
    const auto& s = *t.space;
    os.write("PMMT", 4);
    write_pod<std::uint32_t>(os, 1);
    write_pod<std::uint32_t>(os, D);
    write_pod<std::uint64_t>(os, mesh_hash);
    write_pod<std::uint32_t>(os, s.n);
    write_pod<double>(os, s.g.sigma);
    for (int d = 0; d < D; ++d) {
        write_pod<std::int32_t>(os, s.g.lo[d]);
        write_pod<std::int32_t>(os, s.g.hi[d]);
    }
    write_pod<std::uint32_t>(os, t.points_per_facet);
    write_pod<std::uint64_t>(os, s.lam.size());
    write_pod<std::uint64_t>(os, t.val.size());
    for (double v : t.val) write_pod<double>(os, v);
}

template <std::size_t D>
std::optional<moment_table<D>> read_moment_table(std::istream& is,
                                                 std::shared_ptr<const spline_space<D>> space,
                                                 std::uint64_t mesh_hash, int points_per_facet) {
    if (points_per_facet <= 0) points_per_facet = space->n;
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "PMMT") return std::nullopt;
    if (read_pod<std::uint32_t>(is) != 1) return std::nullopt;
    if (read_pod<std::uint32_t>(is) != std::uint32_t(D)) return std::nullopt;
    if (read_pod<std::uint64_t>(is) != mesh_hash) return std::nullopt;
    if (read_pod<std::uint32_t>(is) != std::uint32_t(space->n)) return std::nullopt;
    if (read_pod<double>(is) != space->g.sigma) return std::nullopt;
    for (int d = 0; d < D; ++d) {
        if (read_pod<std::int32_t>(is) != space->g.lo[d]) return std::nullopt;
        if (read_pod<std::int32_t>(is) != space->g.hi[d]) return std::nullopt;
    }
    if (read_pod<std::uint32_t>(is) != std::uint32_t(points_per_facet)) return std::nullopt;
    if (read_pod<std::uint64_t>(is) != space->lam.size()) return std::nullopt;
    moment_table<D> t;
    t.space = space;
    t.points_per_facet = points_per_facet;
    idx<D> olo, ohi;
    for (int d = 0; d < D; ++d) {
        olo[d] = -(space->n - 1);
        ohi[d] = space->n;
    }
    for_each_multi<D>(olo, ohi, [&](const idx<D>& o) { t.offsets.push_back(o); });
    std::uint64_t count = read_pod<std::uint64_t>(is);
    if (count != std::uint64_t(space->lam.size()) * t.offsets.size()) return std::nullopt;
    t.val.resize(count);
    for (auto& v : t.val) v = read_pod<double>(is);
    if (!is) return std::nullopt;
    return t;
}

}  // namespace pmreg
