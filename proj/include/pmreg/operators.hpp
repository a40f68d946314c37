#pragma once

// operators on the active index set: restricted mass matrix A from the
// moment table, ghost-penalty matrix J from face jumps of the (n-1)st normal
// derivative, the stabilized solve (A + eps J) c = rhs with jacobi-CG, riesz
// representatives in the full-cell L2 pairing, and condition estimation.

#include <unordered_map>

#include "pmreg/integrate.hpp"
#include "pmreg/moments.hpp"

namespace pmreg {

struct csr_matrix {
    int n = 0;
    std::vector<std::int64_t> rowptr;
    std::vector<std::int32_t> col;
    std::vector<double> val;

    void matvec(const double* x, double* y) const {
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (std::int64_t k = rowptr[i]; k < rowptr[i + 1]; ++k) s += val[k] * x[col[k]];
            y[i] = s;
        }
    }
    std::vector<double> diagonal() const {
        std::vector<double> d(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (std::int64_t k = rowptr[i]; k < rowptr[i + 1]; ++k)
                if (col[k] == i) d[i] = val[k];
        return d;
    }
    std::int64_t nnz() const { return std::int64_t(val.size()); }
};

// ---------------------------------------------------------- ghost penalty
// J(v, w) = sigma^{2n-1} sum_{F ghost} int_F [d^{n-1}_nu v][d^{n-1}_nu w].
// for b-splines the (n-1)st normal derivative jumps only at knot planes, so
// each face contributes jump(lam) jump(mu) times tangential span factors;
// everything reduces to cached 1d quantities and the entry scales as sigma^d.

template <std::size_t D> struct ghost_penalty {
    std::shared_ptr<const spline_space<D>> space;
    std::unordered_map<std::int64_t, double> entries;  // key: rank * nb + offset index

    int band() const { return 2 * space->n + 1; }
    int nb() const {
        int r = 1;
        for (std::size_t d = 0; d < D; ++d) r *= band();
        return r;
    }
    int offset_index(const idx<D>& o) const {
        int r = 0;
        for (std::size_t d = 0; d < D; ++d) {
            int v = o[d] + space->n;
            if (v < 0 || v >= band()) return -1;
            r = r * band() + v;
        }
        return r;
    }
    double at(std::int32_t rank, int oi) const {
        auto it = entries.find(std::int64_t(rank) * nb() + oi);
        return it == entries.end() ? 0.0 : it->second;
    }
};

template <std::size_t D>
ghost_penalty<D> assemble_ghost_penalty(const fictitious_domain<D>& fd,
                                        std::shared_ptr<const spline_space<D>> space) {
    const int n = space->n;
    const double sigma = space->g.sigma;
    double scale = 1;  // sigma^{2n-1} * sigma^{-2(n-1)} * sigma^{D-1} = sigma^D
    for (std::size_t d = 0; d < D; ++d) scale *= sigma;
    ghost_penalty<D> J;
    J.space = space;
    const int nb = J.nb();

    struct entry {
        std::int32_t rank;
        idx<D> lam;
        double coef;  // jump factor only; tangential handled pairwise
    };
    std::vector<entry> act;
    for (const auto& f : fd.ghost) {
        const int a = int(f.axis);
        const int k = f.cell[a] + 1;  // knot plane index on the face axis
        act.clear();
        idx<D> l0, l1;
        for (std::size_t d = 0; d < D; ++d) {
            if (int(d) == a) {
                l0[d] = k - n;
                l1[d] = k + 1;
            } else {
                l0[d] = f.cell[d] - n + 1;
                l1[d] = f.cell[d] + 1;
            }
        }
        for_each_multi<D>(l0, l1, [&](const idx<D>& l) {
            std::int32_t r = space->rank_of(l);
            if (r < 0) return;
            act.push_back({r, l, bspline_top_jump(n, k - l[a])});
        });
        for (const auto& ea : act) {
            for (const auto& eb : act) {
                double v = scale * ea.coef * eb.coef;
                for (std::size_t d = 0; d < D; ++d) {
                    if (int(d) == a) continue;
                    v *= span_product(n, f.cell[d] - ea.lam[d], f.cell[d] - eb.lam[d]);
                }
                if (v == 0.0) continue;
                idx<D> o;
                for (std::size_t d = 0; d < D; ++d) o[d] = eb.lam[d] - ea.lam[d];
                J.entries[std::int64_t(ea.rank) * nb + J.offset_index(o)] += v;
            }
        }
    }
    return J;
}

// A + eps J as CSR; pass eps = 0 for the raw restricted mass matrix
template <std::size_t D>
csr_matrix assemble_operator(const moment_table<D>& mt, const ghost_penalty<D>* J, double eps) {
    const auto& s = *mt.space;
    const int n = s.n;
    csr_matrix M;
    M.n = s.count();
    M.rowptr.assign(M.n + 1, 0);
    idx<D> olo, ohi;
    for (std::size_t d = 0; d < D; ++d) {
        olo[d] = -n;
        ohi[d] = n + 1;
    }
    std::vector<idx<D>> offs;
    for_each_multi<D>(olo, ohi, [&](const idx<D>& o) { offs.push_back(o); });
    for (std::int32_t rank = 0; rank < M.n; ++rank) {
        const idx<D>& lam = s.lam[rank];
        for (const auto& o : offs) {
            idx<D> mu = lam + o;
            std::int32_t mr = s.rank_of(mu);
            if (mr < 0) continue;
            double v = 0;
            int aoi = mt.offset_index(o);
            if (aoi >= 0) v += mt.at(rank, aoi);
            if (J && eps != 0.0) v += eps * J->at(rank, J->offset_index(o));
            if (v != 0.0 || mr == rank) {
                M.col.push_back(mr);
                M.val.push_back(v);
            }
        }
        M.rowptr[rank + 1] = std::int64_t(M.col.size());
    }
    return M;
}

// the penalty alone as CSR (diagnostics and kernel checks)
template <std::size_t D> csr_matrix assemble_penalty(const ghost_penalty<D>& J) {
    const auto& s = *J.space;
    const int n = s.n;
    csr_matrix M;
    M.n = s.count();
    M.rowptr.assign(M.n + 1, 0);
    idx<D> olo, ohi;
    for (std::size_t d = 0; d < D; ++d) {
        olo[d] = -n;
        ohi[d] = n + 1;
    }
    std::vector<idx<D>> offs;
    for_each_multi<D>(olo, ohi, [&](const idx<D>& o) { offs.push_back(o); });
    for (std::int32_t rank = 0; rank < M.n; ++rank) {
        for (const auto& o : offs) {
            std::int32_t mr = s.rank_of(s.lam[rank] + o);
            if (mr < 0) continue;
            double v = J.at(rank, J.offset_index(o));
            if (v != 0.0 || mr == rank) {
                M.col.push_back(mr);
                M.val.push_back(v);
            }
        }
        M.rowptr[rank + 1] = std::int64_t(M.col.size());
    }
    return M;
}

// full-cell gram over the fictitious domain cells (L2(Omega_sigma) pairing)
template <std::size_t D>
csr_matrix assemble_gram(const fictitious_domain<D>& fd,
                         std::shared_ptr<const spline_space<D>> space) {
    const auto& s = *space;
    const int n = s.n;
    double sd = 1;
    for (std::size_t d = 0; d < D; ++d) sd *= s.g.sigma;
    csr_matrix M;
    M.n = s.count();
    M.rowptr.assign(M.n + 1, 0);
    idx<D> olo, ohi;
    for (std::size_t d = 0; d < D; ++d) {
        olo[d] = -(n - 1);
        ohi[d] = n;
    }
    std::vector<idx<D>> offs;
    for_each_multi<D>(olo, ohi, [&](const idx<D>& o) { offs.push_back(o); });
    for (std::int32_t rank = 0; rank < M.n; ++rank) {
        const idx<D>& lam = s.lam[rank];
        for (const auto& o : offs) {
            idx<D> mu = lam + o;
            std::int32_t mr = s.rank_of(mu);
            if (mr < 0) continue;
            idx<D> c0, c1;
            for (std::size_t d = 0; d < D; ++d) {
                c0[d] = std::max(lam[d], mu[d]);
                c1[d] = std::min(lam[d], mu[d]) + n;
            }
            double v = 0;
            for_each_multi<D>(c0, c1, [&](const idx<D>& c) {
                if (fd.at(c) == cell_class::outside) return;
                double t = sd;
                for (std::size_t d = 0; d < D; ++d)
                    t *= span_product(n, c[d] - lam[d], c[d] - mu[d]);
                v += t;
            });
            if (v != 0.0 || mr == rank) {
                M.col.push_back(mr);
                M.val.push_back(v);
            }
        }
        M.rowptr[rank + 1] = std::int64_t(M.col.size());
    }
    return M;
}

// ------------------------------------------------------------------ solve

struct solve_report {
    int iterations = 0;
    bool converged = false;
    double residual = 0;             // final relative residual
    std::vector<double> history;     // relative residual per iteration
};

inline std::vector<double> pcg(const csr_matrix& A, const std::vector<double>& b,
                               solve_report& rep, double tol = 1e-12, int max_iter = 0) {
    const int n = A.n;
    if (max_iter <= 0) max_iter = std::min<std::int64_t>(10 * std::int64_t(n) + 100, 200000);
    std::vector<double> x(n, 0.0), r = b, z(n), p(n), ap(n);
    std::vector<double> dinv = A.diagonal();
    for (auto& d : dinv) d = d > 0 ? 1.0 / d : 1.0;
    double bnorm = 0;
    for (double v : b) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    rep = {};
    if (bnorm == 0.0) {
        rep.converged = true;
        return x;
    }
    for (int i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    p = z;
    double rz = 0;
    for (int i = 0; i < n; ++i) rz += r[i] * z[i];
    for (int it = 0; it < max_iter; ++it) {
        A.matvec(p.data(), ap.data());
        double pap = 0;
        for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0 || !std::isfinite(pap)) break;  // lost positive-definiteness
        double alpha = rz / pap;
        double rnorm = 0;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            rnorm += r[i] * r[i];
        }
        rnorm = std::sqrt(rnorm);
        rep.iterations = it + 1;
        rep.residual = rnorm / bnorm;
        rep.history.push_back(rep.residual);
        if (rep.residual <= tol) {
            rep.converged = true;
            return x;
        }
        double rz2 = 0;
        for (int i = 0; i < n; ++i) {
            z[i] = dinv[i] * r[i];
            rz2 += r[i] * z[i];
        }
        double beta = rz2 / rz;
        rz = rz2;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return x;
}

// load vector rhs_lam = int_Omega f b_lam
template <std::size_t D, class F>
std::vector<double> load_vector(const fictitious_domain<D>& fd,
                                std::shared_ptr<const spline_space<D>> space, F&& f,
                                int degree = 0) {
    const auto& s = *space;
    const int n = s.n;
    if (degree <= 0) degree = 2 * n;
    std::vector<double> rhs(s.count(), 0.0);
    for (std::int32_t rank = 0; rank < s.count(); ++rank) {
        const idx<D>& lam = s.lam[rank];
        idx<D> c0 = lam, c1;
        for (std::size_t d = 0; d < D; ++d) c1[d] = lam[d] + n;
        auto g = [&](const vec<D>& x) {
            double v = f(x);
            for (std::size_t d = 0; d < D; ++d) v *= bspline(n, x[d] / s.g.sigma - lam[d]);
            return v;
        };
        double acc = 0;
        for_each_multi<D>(c0, c1,
                          [&](const idx<D>& c) { acc += integrate_cell_domain(fd, c, g, degree); });
        rhs[rank] = acc;
    }
    return rhs;
}

// approximate extension: coefficients of (A + eps J)^{-1} rhs on the space
template <std::size_t D>
spline_field<D> approximate_extension(const moment_table<D>& mt, const ghost_penalty<D>& J,
                                      double eps, const std::vector<double>& rhs,
                                      solve_report& rep, double tol = 1e-12) {
    csr_matrix M = assemble_operator(mt, &J, eps);
    spline_field<D> f(mt.space);
    f.c = pcg(M, rhs, rep, tol);
    return f;
}

// riesz representative of the functional rhs_lam = l(b_lam) in the
// L2(Omega_sigma) pairing
template <std::size_t D>
spline_field<D> riesz_representative(const fictitious_domain<D>& fd,
                                     std::shared_ptr<const spline_space<D>> space,
                                     const std::vector<double>& rhs, solve_report& rep,
                                     double tol = 1e-12) {
    csr_matrix G = assemble_gram(fd, space);
    spline_field<D> f(space);
    f.c = pcg(G, rhs, rep, tol);
    return f;
}

// --------------------------------------------------------- spectral bounds

struct condition_estimate {
    double lambda_max = 0;
    double lambda_min = 0;
    double cond = std::numeric_limits<double>::infinity();
    int power_iterations = 0;
    int inverse_iterations = 0;
    bool ok = false;  // false when the inverse solve failed (near-singular)
};

inline condition_estimate estimate_condition(const csr_matrix& A, double tol = 1e-6,
                                             std::uint64_t seed = 7) {
    condition_estimate ce;
    const int n = A.n;
    if (n == 0) return ce;
    rng_stream rng{rng_key(seed, 0x5ca1ab1eull)};
    std::vector<double> v(n), av(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(i) - 0.5;
    auto normalize = [&](std::vector<double>& w) {
        double s = 0;
        for (double x : w) s += x * x;
        s = std::sqrt(s);
        if (s == 0) return false;
        for (double& x : w) x /= s;
        return true;
    };
    if (!normalize(v)) return ce;
    double lam = 0;
    for (int it = 0; it < 5000; ++it) {
        A.matvec(v.data(), av.data());
        double num = 0;
        for (int i = 0; i < n; ++i) num += v[i] * av[i];
        ce.power_iterations = it + 1;
        bool settled = std::abs(num - lam) <= tol * std::abs(num);
        lam = num;
        v = av;
        if (!normalize(v)) return ce;
        if (settled && it > 2) break;
    }
    ce.lambda_max = lam;

    // inverse power iteration; CG failure marks the matrix near-singular
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(100000 + i) - 0.5;
    normalize(v);
    double mu = 0;
    for (int it = 0; it < 200; ++it) {
        solve_report rep;
        std::vector<double> w = pcg(A, v, rep, 1e-10, 20 * n + 200);
        if (!rep.converged) return ce;  // cond stays infinite
        ce.inverse_iterations = it + 1;
        double nrm = 0;
        for (int i = 0; i < n; ++i) nrm += w[i] * w[i];
        nrm = std::sqrt(nrm);
        if (nrm == 0) return ce;
        double ray = 0;  // v ~ A w / |...|: rayleigh of normalized w
        for (double& x : w) x /= nrm;
        A.matvec(w.data(), av.data());
        for (int i = 0; i < n; ++i) ray += w[i] * av[i];
        bool settled = std::abs(ray - mu) <= tol * std::abs(ray);
        mu = ray;
        v = w;
        if (settled && it > 2) break;
    }
    ce.lambda_min = mu;
    if (mu > 0) {
        ce.cond = ce.lambda_max / mu;
        ce.ok = true;
    }
    return ce;
}

inline void write_matrix_market(std::ostream& os, const csr_matrix& A) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.n << " " << A.n << " " << A.nnz() << "\n";
    os.precision(17);
    for (int i = 0; i < A.n; ++i)
        for (std::int64_t k = A.rowptr[i]; k < A.rowptr[i + 1]; ++k)
            os << i + 1 << " " << A.col[k] + 1 << " " << A.val[k] << "\n";
}

inline void write_solve_log(std::ostream& os, const solve_report& rep) {
    os << "iteration,relative_residual\n";
    os.precision(17);
    for (std::size_t i = 0; i < rep.history.size(); ++i)
        os << i + 1 << "," << rep.history[i] << "\n";
}

}  // namespace pmreg
