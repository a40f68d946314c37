#pragma once

// quadrature over boxes, triangles and clipped cells. cut cells are clipped
// to a polygon and integrated over a signed triangle fan with a collapsed
// (duffy) tensor rule per triangle, so polynomial integrands are exact even
// when the fan leaves a nonconvex clip region.

#include "pmreg/grid.hpp"

namespace pmreg {

template <std::size_t D, class F> double integrate_box(const box<D>& b, F&& f, int pts_per_axis) {
    const auto& g = gauss_legendre(pts_per_axis);
    int total = 1;
    for (int d = 0; d < D; ++d) total *= pts_per_axis;
    double acc = 0;
    for (int q = 0; q < total; ++q) {
        vec<D> x;
        double w = 1;
        int rem = q;
        for (int d = D - 1; d >= 0; --d) {
            int j = rem % pts_per_axis;
            rem /= pts_per_axis;
            x[d] = 0.5 * (b.lo[d] + b.hi[d]) + 0.5 * (b.hi[d] - b.lo[d]) * g.x[j];
            w *= 0.5 * (b.hi[d] - b.lo[d]) * g.w[j];
        }
        acc += w * f(x);
    }
    return acc;
}

// signed triangle integral via the collapsed map x(u,v) = a + u(b-a) + uv(c-b);
// the jacobian u * det(b-a, c-a) carries the fan orientation sign
template <class F>
double integrate_triangle(const vec<2>& a, const vec<2>& b, const vec<2>& c, F&& f,
                          int pts_per_axis) {
    const auto& g = gauss_legendre(pts_per_axis);
    double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if (det == 0.0) return 0.0;
    double acc = 0;
    for (int i = 0; i < pts_per_axis; ++i) {
        double u = 0.5 * (1.0 + g.x[i]), wu = 0.5 * g.w[i];
        for (int j = 0; j < pts_per_axis; ++j) {
            double v = 0.5 * (1.0 + g.x[j]), wv = 0.5 * g.w[j];
            vec<2> x{a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                     a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1])};
            acc += wu * wv * u * det * f(x);
        }
    }
    return acc;
}

template <class F>
double integrate_clipped(const clipped_cell<1>& cc, F&& f, int pts_per_axis) {
    if (cc.measure <= 0.0) return 0.0;
    box<1> b;
    b.lo[0] = cc.ival[0];
    b.hi[0] = cc.ival[1];
    return integrate_box<1>(b, f, pts_per_axis);
}

template <class F>
double integrate_clipped(const clipped_cell<2>& cc, F&& f, int pts_per_axis) {
    if (cc.measure <= 0.0) return 0.0;
    double acc = 0;
    for (const auto& t : cc.triangles())
        acc += integrate_triangle(t.a, t.b, t.c, f, pts_per_axis);
    return acc;
}

// integral of f over cell_box(c) intersect the domain; exact for per-cell
// polynomials of the given per-axis degree when the clip is polygonal
template <std::size_t D, class F>
double integrate_cell_domain(const fictitious_domain<D>& fd, const idx<D>& c, F&& f,
                             int degree) {
    int pts = gauss_points_for_degree(degree) + 1;
    cell_class cl = fd.at(c);
    if (cl == cell_class::outside) return 0.0;
    box<D> b = fd.g.cell_box(c);
    if (cl == cell_class::interior) return integrate_box<D>(b, f, pts);
    auto cc = clip_cell(fd.mesh, b);
    return integrate_clipped(cc, f, pts);
}

template <std::size_t D, class F>
double integrate_domain(const fictitious_domain<D>& fd, F&& f, int degree) {
    double acc = 0;
    for_each_multi<D>(fd.g.lo, fd.g.hi,
                      [&](const idx<D>& c) { acc += integrate_cell_domain(fd, c, f, degree); });
    return acc;
}

// L^p(Omega) norm of a pointwise error function, p = 1, 2 or inf. finite p
// integrates |f|^p cellwise; p = inf takes the max over the same sample set.
template <std::size_t D, class F> double domain_norm(const fictitious_domain<D>& fd, F&& f, double p,
                                             int degree = 8) {
    const bool inf = std::isinf(p);
    double acc = 0;
    auto probe = [&](const vec<D>& x) {  // max-tracking side effect; weights ignored
        acc = std::max(acc, std::abs(f(x)));
        return 0.0;
    };
    auto power = [&](const vec<D>& x) { return std::pow(std::abs(f(x)), p); };
    int pts = gauss_points_for_degree(degree) + 1;
    for_each_multi<D>(fd.g.lo, fd.g.hi, [&](const idx<D>& c) {
        cell_class cl = fd.at(c);
        if (cl == cell_class::outside) return;
        box<D> b = fd.g.cell_box(c);
        if (cl == cell_class::interior) {
            if (inf)
                integrate_box<D>(b, probe, pts);
            else
                acc += integrate_box<D>(b, power, pts);
        } else {
            auto cc = clip_cell(fd.mesh, b);
            if (inf)
                integrate_clipped(cc, probe, pts);
            else
                acc += integrate_clipped(cc, power, pts);
        }
    });
    return inf ? acc : std::pow(acc, 1.0 / p);
}

}  // namespace pmreg
