#pragma once

// boundary-mesh-only domain description: an oriented vertex loop (2d, ccw,
// outward normal = tangent rotated -90 deg) or an interval (1d). everything
// downstream (classification, cut moments, error norms) reduces to three
// queries: point membership, cell clipping, boundary pieces inside a box.

#include <fstream>
#include <sstream>

#include "pmreg/common.hpp"

namespace pmreg {

struct mesh_error : error {
    using error::error;
};

template <std::size_t D> struct boundary_mesh;

template <> struct boundary_mesh<1> {
    double a = 0, b = 1;  // domain (a, b)
};

template <> struct boundary_mesh<2> {
    std::vector<vec<2>> v;  // ccw loop, facet i runs v[i] -> v[(i+1)%m]
};

// ------------------------------------------------------------------ basics

inline double polygon_area(const std::vector<vec<2>>& v) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * s;
}

inline box<1> bbox(const boundary_mesh<1>& m) { return {{m.a}, {m.b}}; }
inline box<2> bbox(const boundary_mesh<2>& m) {
    box<2> b{{m.v[0][0], m.v[0][1]}, {m.v[0][0], m.v[0][1]}};
    for (const auto& p : m.v)
        for (int d = 0; d < 2; ++d) {
            b.lo[d] = std::min(b.lo[d], p[d]);
            b.hi[d] = std::max(b.hi[d], p[d]);
        }
    return b;
}

template <std::size_t D> inline double mesh_scale(const boundary_mesh<D>& m) {
    auto b = bbox(m);
    double s = 0;
    for (int d = 0; d < D; ++d) s = std::max(s, b.hi[d] - b.lo[d]);
    return s;
}

inline int facet_count(const boundary_mesh<1>&) { return 2; }
inline int facet_count(const boundary_mesh<2>& m) { return int(m.v.size()); }

struct facet2 {
    vec<2> a, b, n;  // endpoints and unit outward normal
    double len;
};

inline facet2 facet(const boundary_mesh<2>& m, int i) {
    facet2 f;
    f.a = m.v[i];
    f.b = m.v[(i + 1) % m.v.size()];
    vec<2> t = f.b - f.a;
    f.len = norm2(t);
    f.n = {t[1] / f.len, -t[0] / f.len};
    return f;
}

inline double dist_point_segment(const vec<2>& x, const vec<2>& a, const vec<2>& b) {
    vec<2> ab = b - a;
    double L2 = dot(ab, ab);
    double t = L2 > 0 ? std::clamp(dot(x - a, ab) / L2, 0.0, 1.0) : 0.0;
    return norm2(x - (a + t * ab));
}

inline double dist_to_boundary(const boundary_mesh<1>& m, const vec<1>& x) {
    return std::min(std::abs(x[0] - m.a), std::abs(x[0] - m.b));
}
inline double dist_to_boundary(const boundary_mesh<2>& m, const vec<2>& x) {
    double d = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < m.v.size(); ++i)
        d = std::min(d, dist_point_segment(x, m.v[i], m.v[(i + 1) % m.v.size()]));
    return d;
}

inline vec<1> project_to_boundary(const boundary_mesh<1>& m, const vec<1>& x) {
    return {std::abs(x[0] - m.a) < std::abs(x[0] - m.b) ? m.a : m.b};
}
inline vec<2> project_to_boundary(const boundary_mesh<2>& m, const vec<2>& x) {
    double best = std::numeric_limits<double>::max();
    vec<2> r = x;
    for (std::size_t i = 0; i < m.v.size(); ++i) {
        const vec<2>&a = m.v[i], &b = m.v[(i + 1) % m.v.size()];
        vec<2> ab = b - a;
        double L2 = dot(ab, ab);
        double t = L2 > 0 ? std::clamp(dot(x - a, ab) / L2, 0.0, 1.0) : 0.0;
        vec<2> p = a + t * ab;
        double d = norm2(x - p);
        if (d < best) {
            best = d;
            r = p;
        }
    }
    return r;
}

// ------------------------------------------------------------- membership
// convention: points within 1e-12 * mesh scale of the boundary count as
// inside; elsewhere crossing parity decides.

inline constexpr double boundary_tol_rel = 1e-12;

inline bool point_in_domain(const boundary_mesh<1>& m, const vec<1>& x) {
    double tol = boundary_tol_rel * mesh_scale(m);
    return x[0] >= m.a - tol && x[0] <= m.b + tol;
}

inline bool point_in_domain(const boundary_mesh<2>& m, const vec<2>& x) {
    if (dist_to_boundary(m, x) <= boundary_tol_rel * mesh_scale(m)) return true;
    bool in = false;
    for (std::size_t i = 0; i < m.v.size(); ++i) {
        const vec<2>&p = m.v[i], &q = m.v[(i + 1) % m.v.size()];
        if ((p[1] > x[1]) != (q[1] > x[1])) {
            double xi = p[0] + (x[1] - p[1]) * (q[0] - p[0]) / (q[1] - p[1]);
            if (x[0] < xi) in = !in;
        }
    }
    return in;
}

// ------------------------------------------------------------ cell clipping

template <std::size_t D> struct clipped_cell;

template <> struct clipped_cell<1> {
    double measure = 0;
    bool degenerate = false;  // positive but below 1e-12 * cell measure
    bool full = false;
    std::array<double, 2> ival{0, 0};
};

template <> struct clipped_cell<2> {
    double measure = 0;
    bool degenerate = false;
    bool full = false;
    std::vector<vec<2>> verts;  // ccw (possibly with degenerate bridge edges)

    struct tri {
        vec<2> a, b, c;
        double signed_area;
    };
    // signed fan from verts[0]; signed areas sum to the measure, which makes
    // integration exact even when sutherland-hodgman leaves bridge edges
    std::vector<tri> triangles() const {
        std::vector<tri> ts;
        for (std::size_t i = 1; i + 1 < verts.size(); ++i) {
            tri t{verts[0], verts[i], verts[i + 1], 0};
            t.signed_area = 0.5 * ((t.b[0] - t.a[0]) * (t.c[1] - t.a[1]) -
                                   (t.c[0] - t.a[0]) * (t.b[1] - t.a[1]));
            ts.push_back(t);
        }
        return ts;
    }
};

inline clipped_cell<1> clip_cell(const boundary_mesh<1>& m, const box<1>& cell) {
    clipped_cell<1> r;
    double lo = std::max(cell.lo[0], m.a), hi = std::min(cell.hi[0], m.b);
    double full = cell.hi[0] - cell.lo[0];
    r.measure = std::max(0.0, hi - lo);
    r.ival = {lo, std::max(lo, hi)};
    if (r.measure > 0 && r.measure < 1e-12 * full) {
        r.degenerate = true;
        r.measure = 0;
    }
    r.full = r.measure >= full * (1 - 1e-12);
    return r;
}

namespace detail {
// keep the side s*(x[ax] - c) <= 0; boundary points kept
inline void clip_halfplane(std::vector<vec<2>>& p, int ax, double c, int s) {
    if (p.empty()) return;
    std::vector<vec<2>> out;
    out.reserve(p.size() + 4);
    auto inside = [&](const vec<2>& q) { return s * (q[ax] - c) <= 0; };
    for (std::size_t i = 0; i < p.size(); ++i) {
        const vec<2>& P = p[i];
        const vec<2>& Q = p[(i + 1) % p.size()];
        bool pi = inside(P), qi = inside(Q);
        if (pi) out.push_back(P);
        if (pi != qi) {
            double t = (c - P[ax]) / (Q[ax] - P[ax]);
            vec<2> X;
            X[ax] = c;
            X[1 - ax] = P[1 - ax] + t * (Q[1 - ax] - P[1 - ax]);
            out.push_back(X);
        }
    }
    p.swap(out);
}
}  // namespace detail

inline clipped_cell<2> clip_cell(const boundary_mesh<2>& m, const box<2>& cell) {
    clipped_cell<2> r;
    r.verts = m.v;
    detail::clip_halfplane(r.verts, 0, cell.lo[0], -1);
    detail::clip_halfplane(r.verts, 0, cell.hi[0], +1);
    detail::clip_halfplane(r.verts, 1, cell.lo[1], -1);
    detail::clip_halfplane(r.verts, 1, cell.hi[1], +1);
    double full = cell.measure();
    r.measure = r.verts.size() >= 3 ? std::max(0.0, polygon_area(r.verts)) : 0.0;
    if (r.measure > 0 && r.measure < 1e-12 * full) {
        r.degenerate = true;
        r.measure = 0;
    }
    r.full = r.measure >= full * (1 - 1e-12);
    return r;
}

// --------------------------------------------- boundary pieces inside a box

template <std::size_t D> struct boundary_piece;

template <> struct boundary_piece<1> {
    double x;
    double orient;  // outward direction, -1 at the left end, +1 at the right
};

template <> struct boundary_piece<2> {
    vec<2> a, b, n;
    int facet;
};

inline std::vector<boundary_piece<1>> boundary_in_box(const boundary_mesh<1>& m,
                                                      const box<1>& bx) {
    std::vector<boundary_piece<1>> r;
    if (m.a >= bx.lo[0] && m.a <= bx.hi[0]) r.push_back({m.a, -1.0});
    if (m.b >= bx.lo[0] && m.b <= bx.hi[0]) r.push_back({m.b, +1.0});
    return r;
}

// liang-barsky segment/box clip
inline bool clip_segment_box(const box<2>& bx, vec<2>& a, vec<2>& b) {
    double t0 = 0, t1 = 1;
    vec<2> d = b - a;
    for (int ax = 0; ax < 2; ++ax) {
        for (int side = 0; side < 2; ++side) {
            double p = side == 0 ? -d[ax] : d[ax];
            double q = side == 0 ? a[ax] - bx.lo[ax] : bx.hi[ax] - a[ax];
            if (p == 0) {
                if (q < 0) return false;
            } else {
                double t = q / p;
                if (p < 0) {
                    if (t > t1) return false;
                    t0 = std::max(t0, t);
                } else {
                    if (t < t0) return false;
                    t1 = std::min(t1, t);
                }
            }
        }
    }
    if (t0 >= t1) return false;
    vec<2> na = a + t0 * d, nb = a + t1 * d;
    a = na;
    b = nb;
    return true;
}

inline std::vector<boundary_piece<2>> boundary_in_box(const boundary_mesh<2>& m,
                                                      const box<2>& bx) {
    std::vector<boundary_piece<2>> r;
    for (int i = 0; i < facet_count(m); ++i) {
        facet2 f = facet(m, i);
        vec<2> a = f.a, b = f.b;
        if (clip_segment_box(bx, a, b) && norm2(b - a) > 0) r.push_back({a, b, f.n, i});
    }
    return r;
}

// gauss nodes on each facet piece inside the box; in 1d a node has weight 1
// and its normal slot carries the outward orientation
// parameter intervals of the segment a + t(b - a), t in [0,1], lying inside
// the domain. cut points come from facet crossings; each open subinterval is
// classified at its midpoint shifted by probe_offset (pass a small inward
// nudge when the segment may run along the boundary itself).
inline std::vector<std::pair<double, double>> segment_in_domain(const boundary_mesh<2>& m,
                                                                const vec<2>& a, const vec<2>& b,
                                                                const vec<2>& probe_offset) {
    std::vector<double> ts{0.0, 1.0};
    vec<2> d = b - a;
    for (int i = 0; i < facet_count(m); ++i) {
        facet2 f = facet(m, i);
        vec<2> e = f.b - f.a;
        double den = d[0] * e[1] - d[1] * e[0];
        if (den == 0.0) continue;  // parallel: interval classification decides
        double t = ((f.a[0] - a[0]) * e[1] - (f.a[1] - a[1]) * e[0]) / den;
        double s = ((f.a[0] - a[0]) * d[1] - (f.a[1] - a[1]) * d[0]) / den;
        if (t > 0.0 && t < 1.0 && s >= -1e-12 && s <= 1.0 + 1e-12) ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        double t0 = ts[i], t1 = ts[i + 1];
        if (t1 - t0 < 1e-12) continue;
        vec<2> mid = a + (0.5 * (t0 + t1)) * d + probe_offset;
        if (point_in_domain(m, mid)) {
            if (!out.empty() && std::abs(out.back().second - t0) < 1e-12)
                out.back().second = t1;
            else
                out.emplace_back(t0, t1);
        }
    }
    return out;
}

template <std::size_t D> struct boundary_quad {
    std::vector<vec<D>> x;
    std::vector<double> w;
    std::vector<vec<D>> normal;
    std::vector<int> facet;
};

inline boundary_quad<1> boundary_rule(const boundary_mesh<1>& m, const box<1>& bx, int) {
    boundary_quad<1> q;
    for (const auto& p : boundary_in_box(m, bx)) {
        q.x.push_back({p.x});
        q.w.push_back(1.0);
        q.normal.push_back({p.orient});
        q.facet.push_back(p.orient < 0 ? 0 : 1);
    }
    return q;
}

inline boundary_quad<2> boundary_rule(const boundary_mesh<2>& m, const box<2>& bx, int pts) {
    boundary_quad<2> q;
    const auto& g = gauss_legendre(pts);
    for (const auto& p : boundary_in_box(m, bx)) {
        double len = norm2(p.b - p.a);
        for (int i = 0; i < pts; ++i) {
            double t = 0.5 + 0.5 * g.x[i];
            q.x.push_back(p.a + t * (p.b - p.a));
            q.w.push_back(0.5 * g.w[i] * len);
            q.normal.push_back(p.n);
            q.facet.push_back(p.facet);
        }
    }
    return q;
}

// -------------------------------------------------------------- validation

namespace detail {

inline int orient_sign(const vec<2>& a, const vec<2>& b, const vec<2>& c, double eps) {
    double v = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    return v > eps ? 1 : (v < -eps ? -1 : 0);
}

inline bool on_segment(const vec<2>& a, const vec<2>& b, const vec<2>& p, double eps) {
    return dist_point_segment(p, a, b) <= eps;
}

// true when the two segments share more than an allowed common endpoint
inline bool segments_conflict(const vec<2>& p1, const vec<2>& q1, const vec<2>& p2,
                              const vec<2>& q2, bool adjacent, double eps) {
    double eps2 = eps * eps;
    int o1 = orient_sign(p1, q1, p2, eps2);
    int o2 = orient_sign(p1, q1, q2, eps2);
    int o3 = orient_sign(p2, q2, p1, eps2);
    int o4 = orient_sign(p2, q2, q1, eps2);
    if (o1 * o2 < 0 && o3 * o4 < 0) return true;  // proper crossing
    auto shared = [&](const vec<2>& u) {
        return adjacent && (norm2(u - p1) <= eps || norm2(u - q1) <= eps || norm2(u - p2) <= eps ||
                            norm2(u - q2) <= eps);
    };
    // touching contacts; a shared endpoint of adjacent facets is the only pass
    if (o1 == 0 && on_segment(p1, q1, p2, eps) && !shared(p2)) return true;
    if (o2 == 0 && on_segment(p1, q1, q2, eps) && !shared(q2)) return true;
    if (o3 == 0 && on_segment(p2, q2, p1, eps) && !shared(p1)) return true;
    if (o4 == 0 && on_segment(p2, q2, q1, eps) && !shared(q1)) return true;
    if (adjacent && o1 == 0 && o2 == 0 && o3 == 0 && o4 == 0) {
        // collinear adjacent facets: conflict iff they overlap beyond the vertex
        double len = std::min(norm2(q1 - p1), norm2(q2 - p2));
        vec<2> mid2 = 0.5 * (p2 + q2);
        if (len > eps && on_segment(p1, q1, mid2, eps)) return true;
    }
    return false;
}

}  // namespace detail

inline void validate_mesh(const boundary_mesh<1>& m) {
    if (!(m.a < m.b)) throw mesh_error("interval mesh needs a < b");
}

inline void validate_mesh(const boundary_mesh<2>& m) {
    const int n = int(m.v.size());
    if (n < 3) throw mesh_error("polygon mesh needs at least 3 vertices");
    double scale = mesh_scale(m);
    double eps = 1e-12 * scale;
    for (int i = 0; i < n; ++i)
        if (norm2(m.v[(i + 1) % n] - m.v[i]) <= eps)
            throw mesh_error("zero-length facet at vertex " + std::to_string(i));
    if (polygon_area(m.v) <= 0)
        throw mesh_error("polygon must be counter-clockwise (positive area)");

    // sweep facets by x-interval and test overlapping pairs
    struct seg {
        double x0, x1;
        int id;
    };
    std::vector<seg> order(n);
    for (int i = 0; i < n; ++i) {
        facet2 f = facet(m, i);
        order[i] = {std::min(f.a[0], f.b[0]), std::max(f.a[0], f.b[0]), i};
    }
    std::sort(order.begin(), order.end(), [](const seg& a, const seg& b) { return a.x0 < b.x0; });
    for (int i = 0; i < n; ++i) {
        facet2 fi = facet(m, order[i].id);
        for (int j = i + 1; j < n && order[j].x0 <= order[i].x1 + eps; ++j) {
            int a = order[i].id, b = order[j].id;
            bool adjacent = (a + 1) % n == b || (b + 1) % n == a;
            facet2 fj = facet(m, b);
            if (detail::segments_conflict(fi.a, fi.b, fj.a, fj.b, adjacent, eps))
                throw mesh_error("self-intersecting polygon (facets " + std::to_string(a) +
                                 " and " + std::to_string(b) + ")");
        }
    }
}

// ------------------------------------------------------------ constructors

inline boundary_mesh<1> make_interval_mesh(double a, double b) {
    boundary_mesh<1> m{a, b};
    validate_mesh(m);
    return m;
}

inline boundary_mesh<2> make_rect_mesh(vec<2> lo, vec<2> hi) {
    boundary_mesh<2> m;
    m.v = {{lo[0], lo[1]}, {hi[0], lo[1]}, {hi[0], hi[1]}, {lo[0], hi[1]}};
    validate_mesh(m);
    return m;
}

inline boundary_mesh<2> make_disk_mesh(int nverts, double radius = 1.0, vec<2> center = {0, 0}) {
    boundary_mesh<2> m;
    m.v.reserve(nverts);
    for (int i = 0; i < nverts; ++i) {
        double a = 2 * M_PI * i / nverts;
        m.v.push_back({center[0] + radius * std::cos(a), center[1] + radius * std::sin(a)});
    }
    validate_mesh(m);
    return m;
}

template <std::size_t D> inline boundary_mesh<D> translate(boundary_mesh<D> m, const vec<D>& t) {
    if constexpr (D == 1) {
        m.a += t[0];
        m.b += t[0];
    } else {
        for (auto& p : m.v) p = p + t;
    }
    return m;
}

// ----------------------------------------------------------------- file io
// line 1: "dim d"; then "v x y" per vertex (2d, ccw, implicitly closed) or a
// single "interval a b" (1d). blank lines and #-comments are skipped.

inline std::vector<std::string> mesh_file_lines(std::istream& is) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        auto h = line.find('#');
        if (h != std::string::npos) line = line.substr(0, h);
        std::istringstream probe(line);
        std::string tok;
        if (probe >> tok) lines.push_back(line);
    }
    return lines;
}

inline int mesh_dim(std::istream& is) {
    auto lines = mesh_file_lines(is);
    if (lines.empty()) throw mesh_error("empty mesh file");
    std::istringstream first(lines[0]);
    std::string kw;
    int d = 0;
    if (!(first >> kw >> d) || kw != "dim" || (d != 1 && d != 2))
        throw mesh_error("mesh file must start with 'dim 1' or 'dim 2'");
    return d;
}

template <std::size_t D> boundary_mesh<D> read_mesh(std::istream& is);

template <> inline boundary_mesh<1> read_mesh<1>(std::istream& is) {
    auto lines = mesh_file_lines(is);
    if (lines.size() != 2) throw mesh_error("1d mesh file needs exactly one interval line");
    std::istringstream ls(lines[1]);
    std::string kw;
    boundary_mesh<1> m;
    if (!(ls >> kw >> m.a >> m.b) || kw != "interval")
        throw mesh_error("expected 'interval a b'");
    validate_mesh(m);
    return m;
}

template <> inline boundary_mesh<2> read_mesh<2>(std::istream& is) {
    auto lines = mesh_file_lines(is);
    boundary_mesh<2> m;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream ls(lines[i]);
        std::string kw;
        vec<2> p;
        if (!(ls >> kw >> p[0] >> p[1]) || kw != "v")
            throw mesh_error("expected 'v x y' at line " + std::to_string(i + 1));
        m.v.push_back(p);
    }
    validate_mesh(m);
    return m;
}

template <std::size_t D> boundary_mesh<D> read_mesh_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw mesh_error("cannot open mesh file: " + path);
    std::ifstream probe(path);
    if (mesh_dim(probe) != D) throw mesh_error("mesh file dimension mismatch: " + path);
    return read_mesh<D>(f);
}

inline int mesh_file_dim(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw mesh_error("cannot open mesh file: " + path);
    return mesh_dim(f);
}

template <std::size_t D> void write_mesh(std::ostream& os, const boundary_mesh<D>& m) {
    os.precision(17);
    os << "dim " << D << "\n";
    if constexpr (D == 1) {
        os << "interval " << m.a << " " << m.b << "\n";
    } else {
        for (const auto& p : m.v) os << "v " << p[0] << " " << p[1] << "\n";
    }
}

// fnv-1a over the serialized mesh; keys cache files
template <std::size_t D> std::uint64_t mesh_hash(const boundary_mesh<D>& m) {
    std::ostringstream os;
    write_mesh(os, m);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : os.str()) h = (h ^ c) * 1099511628211ull;
    return h;
}

}  // namespace pmreg
