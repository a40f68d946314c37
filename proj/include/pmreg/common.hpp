#pragma once

// shared small numerics: d-dim points/boxes, multi-index loops, polynomials,
// gauss rules, a counter-based rng, log-log fits, binary io.

#include <algorithm>
#include <array>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmreg {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <std::size_t D> using vec = std::array<double, D>;
template <std::size_t D> using idx = std::array<int, D>;

template <std::size_t N>
inline std::array<double, N> operator+(std::array<double, N> a, const std::array<double, N>& b) {
    for (std::size_t d = 0; d < N; ++d) a[d] += b[d];
    return a;
}
template <std::size_t N>
inline std::array<double, N> operator-(std::array<double, N> a, const std::array<double, N>& b) {
    for (std::size_t d = 0; d < N; ++d) a[d] -= b[d];
    return a;
}
template <std::size_t N>
inline std::array<double, N> operator*(double s, std::array<double, N> a) {
    for (std::size_t d = 0; d < N; ++d) a[d] *= s;
    return a;
}
template <std::size_t N>
inline std::array<int, N> operator+(std::array<int, N> a, const std::array<int, N>& b) {
    for (std::size_t d = 0; d < N; ++d) a[d] += b[d];
    return a;
}
template <std::size_t N>
inline double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
    double s = 0;
    for (std::size_t d = 0; d < N; ++d) s += a[d] * b[d];
    return s;
}
template <std::size_t N> inline double norm2(const std::array<double, N>& a) {
    return std::sqrt(dot(a, a));
}

inline double sq(double x) { return x * x; }

inline double ipow(double b, int e) {
    double r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

inline std::int64_t binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::int64_t r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

template <std::size_t D> struct box {
    vec<D> lo{}, hi{};
    double measure() const {
        double m = 1;
        for (int d = 0; d < D; ++d) m *= hi[d] - lo[d];
        return m;
    }
    bool contains(const vec<D>& x) const {
        for (int d = 0; d < D; ++d)
            if (x[d] < lo[d] || x[d] > hi[d]) return false;
        return true;
    }
};

// half-open multi-index loop over [lo, hi), lexicographic, last axis fastest
template <std::size_t D, class F> inline void for_each_multi(const idx<D>& lo, const idx<D>& hi, F&& f) {
    idx<D> i = lo;
    for (int d = 0; d < D; ++d)
        if (lo[d] >= hi[d]) return;
    while (true) {
        f(static_cast<const idx<D>&>(i));
        int d = D - 1;
        while (d >= 0) {
            if (++i[d] < hi[d]) break;
            i[d] = lo[d];
            --d;
        }
        if (d < 0) return;
    }
}

// ---------------------------------------------------------------- fixed rng
// counter-based: a stream is (key, counter) -> 64 bits, no sequential state,
// so draws are reproducible per logical object regardless of evaluation order.

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t rng_key(std::uint64_t seed) { return mix64(seed); }
template <class... Rest>
inline std::uint64_t rng_key(std::uint64_t seed, std::uint64_t first, Rest... rest) {
    return rng_key(mix64(seed ^ (first + 0x9e3779b97f4a7c15ull)), rest...);
}

struct rng_stream {
    std::uint64_t key = 0;
    std::uint64_t bits(std::uint64_t counter) const { return mix64(key ^ mix64(counter + 1)); }
    double uniform(std::uint64_t counter) const {
        return double(bits(counter) >> 11) * 0x1.0p-53;
    }
};

// sequential convenience wrapper over a stream
struct rng_seq {
    rng_stream s;
    std::uint64_t n = 0;
    explicit rng_seq(std::uint64_t key) : s{key} {}
    double uniform() { return s.uniform(n++); }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::uint64_t bits() { return s.bits(n++); }
};

// ------------------------------------------------------------- polynomials

struct poly {
    std::vector<double> c;  // c[0] + c[1] t + ...

    poly() = default;
    explicit poly(std::vector<double> coeffs) : c(std::move(coeffs)) {}
    static poly constant(double v) { return poly({v}); }

    int degree() const { return int(c.size()) - 1; }

    double operator()(double t) const {
        double r = 0;
        for (std::size_t i = c.size(); i-- > 0;) r = r * t + c[i];
        return r;
    }

    poly derivative() const {
        if (c.size() <= 1) return poly({0.0});
        poly d;
        d.c.resize(c.size() - 1);
        for (std::size_t i = 1; i < c.size(); ++i) d.c[i - 1] = c[i] * double(i);
        return d;
    }

    poly antiderivative() const {  // vanishing at 0
        poly a;
        a.c.assign(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) a.c[i + 1] = c[i] / double(i + 1);
        return a;
    }

    friend poly operator*(const poly& a, const poly& b) {
        poly r;
        if (a.c.empty() || b.c.empty()) return r;
        r.c.assign(a.c.size() + b.c.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i)
            for (std::size_t j = 0; j < b.c.size(); ++j) r.c[i + j] += a.c[i] * b.c[j];
        return r;
    }
    friend poly operator+(const poly& a, const poly& b) {
        poly r;
        r.c.assign(std::max(a.c.size(), b.c.size()), 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
        for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] += b.c[i];
        return r;
    }
    friend poly operator*(double s, poly p) {
        for (auto& v : p.c) v *= s;
        return p;
    }

    // p(a + b t) as a polynomial in t
    poly compose_affine(double a, double b) const {
        poly r({0.0});
        poly lin({a, b});
        for (std::size_t i = c.size(); i-- > 0;) r = r * lin + poly::constant(c[i]);
        return r;
    }
};

// piecewise polynomial on sorted breakpoints; zero before the first break,
// `tail` at and after the last (tail != 0 only for antiderivatives).
struct piecewise_poly {
    std::vector<double> breaks;
    std::vector<poly> pieces;  // pieces[i] valid on [breaks[i], breaks[i+1]), argument is x - breaks[i]
    double tail = 0.0;

    bool empty() const { return pieces.empty(); }

    double operator()(double x) const { return eval(x, 0); }

    double eval(double x, int r) const {
        if (empty() || x < breaks.front()) return 0.0;
        if (x >= breaks.back()) return r == 0 ? tail : 0.0;
        std::size_t i = std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin() - 1;
        poly p = pieces[i];
        for (int k = 0; k < r; ++k) p = p.derivative();
        return p(x - breaks[i]);
    }

    piecewise_poly derivative() const {
        piecewise_poly d;
        d.breaks = breaks;
        d.pieces.reserve(pieces.size());
        for (const auto& p : pieces) d.pieces.push_back(p.derivative());
        return d;
    }

    piecewise_poly antiderivative() const {  // continuous, 0 before support
        piecewise_poly a;
        a.breaks = breaks;
        a.pieces.reserve(pieces.size());
        double acc = 0;
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            poly ap = pieces[i].antiderivative();
            ap.c[0] = acc;
            a.pieces.push_back(ap);
            acc = ap(breaks[i + 1] - breaks[i]);
        }
        a.tail = acc;
        return a;
    }

    double integral(double x0, double x1) const {
        piecewise_poly a = antiderivative();
        return a(x1) - a(x0);
    }
    double integral() const { return antiderivative().tail; }

    friend piecewise_poly operator*(const piecewise_poly& a, const piecewise_poly& b) {
        piecewise_poly r;
        if (a.empty() || b.empty()) return r;
        double lo = std::max(a.breaks.front(), b.breaks.front());
        double hi = std::min(a.breaks.back(), b.breaks.back());
        if (!(lo < hi)) return r;
        std::vector<double> bk;
        for (double x : a.breaks)
            if (x >= lo && x <= hi) bk.push_back(x);
        for (double x : b.breaks)
            if (x >= lo && x <= hi) bk.push_back(x);
        bk.push_back(lo);
        bk.push_back(hi);
        std::sort(bk.begin(), bk.end());
        bk.erase(std::unique(bk.begin(), bk.end(),
                             [](double u, double v) { return std::abs(u - v) < 1e-14; }),
                 bk.end());
        r.breaks = bk;
        for (std::size_t i = 0; i + 1 < bk.size(); ++i) {
            // shift both factors to local coordinate t = x - bk[i]
            auto local = [&](const piecewise_poly& f) {
                double xm = 0.5 * (bk[i] + bk[i + 1]);
                std::size_t j =
                    std::upper_bound(f.breaks.begin(), f.breaks.end(), xm) - f.breaks.begin() - 1;
                return f.pieces[j].compose_affine(bk[i] - f.breaks[j], 1.0);
            };
            r.pieces.push_back(local(a) * local(b));
        }
        return r;
    }

    // f(a + b x) with b > 0
    piecewise_poly compose_affine(double a, double b) const {
        assert(b > 0);
        piecewise_poly r;
        r.breaks.reserve(breaks.size());
        for (double x : breaks) r.breaks.push_back((x - a) / b);
        for (const auto& p : pieces) {
            poly q = p.compose_affine(0.0, b);
            r.pieces.push_back(q);
        }
        r.tail = tail;
        return r;
    }
};

// ------------------------------------------------------------- gauss rules

struct gauss_rule {
    std::vector<double> x, w;  // on [-1, 1]
};

// newton on legendre recurrence; cached per point count
inline const gauss_rule& gauss_legendre(int m) {
    static std::vector<std::optional<gauss_rule>> cache;
    if (m < 1) throw error("gauss_legendre: need m >= 1");
    if (int(cache.size()) <= m) cache.resize(m + 1);
    if (!cache[m]) {
        gauss_rule r;
        r.x.resize(m);
        r.w.resize(m);
        for (int i = 0; i < m; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1, p1 = x;
                for (int k = 2; k <= m; ++k) {
                    double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                double dp = m * (x * p1 - p0) / (x * x - 1);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            double p0 = 1, p1 = x;
            for (int k = 2; k <= m; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = m * (x * p1 - p0) / (x * x - 1);
            r.x[m - 1 - i] = x;
            r.w[m - 1 - i] = 2.0 / ((1 - x * x) * dp * dp);
        }
        cache[m] = std::move(r);
    }
    return *cache[m];
}

// nodes/weights mapped to [a, b]
inline void gauss_on(int m, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    const auto& g = gauss_legendre(m);
    x.resize(m);
    w.resize(m);
    for (int i = 0; i < m; ++i) {
        x[i] = 0.5 * (a + b) + 0.5 * (b - a) * g.x[i];
        w[i] = 0.5 * (b - a) * g.w[i];
    }
}

inline int gauss_points_for_degree(int deg) { return deg / 2 + 1; }

// --------------------------------------------------------------- log-log fit

struct fit_result {
    double slope = 0, intercept = 0, r2 = 0;
    int points = 0;
};

// least squares of log(y) against log(x)
inline fit_result fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    fit_result f;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0 && y[i] > 0 && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    f.points = int(lx.size());
    if (f.points < 2) return f;
    double n = double(f.points);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < f.points; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
        syy += ly[i] * ly[i];
    }
    double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    if (vx <= 0) return f;
    f.slope = cxy / vx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
    return f;
}

// ---------------------------------------------------------------- binary io

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

template <class T> inline void write_pod(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T> inline T read_pod(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw error("unexpected end of file");
    return v;
}

}  // namespace pmreg
