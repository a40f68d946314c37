#pragma once

// independent reference implementations used by the unit and acceptance
// suites. nothing here shares code paths with the library: the b-spline
// comes from the convolution definition, moments from riemann sums or
// geometric clipping, lp optima from basic-feasible-point enumeration,
// eigenvalues from a dense solver.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "pmreg/common.hpp"

namespace oracle {

// cardinal b-spline of order n from the convolution definition
//   b1 = 1_[0,1),   bn(x) = integral_0^1 b_{n-1}(x - t) dt
// evaluated by recursive gauss quadrature split at the knots of the
// integrand, so every sub-integral has a smooth (polynomial) integrand.
inline double conv_bspline(int n, double x) {
    if (n == 1) return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
    if (x <= 0.0 || x >= n) return 0.0;
    // integrand b_{n-1}(x - t) for t in [0,1] has kinks where x - t is integer
    std::vector<double> cuts{0.0, 1.0};
    for (int k = 0; k < n; ++k) {
        double t = x - k;
        if (t > 0.0 && t < 1.0) cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    const auto& g = pmreg::gauss_legendre(8);
    double acc = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = cuts[i], b = cuts[i + 1];
        if (b - a < 1e-15) continue;
        for (int q = 0; q < 8; ++q) {
            double t = 0.5 * (a + b) + 0.5 * (b - a) * g.x[q];
            acc += 0.5 * (b - a) * g.w[q] * conv_bspline(n - 1, x - t);
        }
    }
    return acc;
}

// midpoint riemann sum on [a, b]
template <class F> double riemann_1d(F&& f, double a, double b, int m) {
    double h = (b - a) / m, acc = 0;
    for (int i = 0; i < m; ++i) acc += f(a + (i + 0.5) * h);
    return acc * h;
}

// centered finite difference of order r
template <class F> double fd_derivative(F&& f, double x, int r, double h) {
    if (r == 0) return f(x);
    auto g = [&](double y) { return fd_derivative(f, y, r - 1, h); };
    return (g(x + 0.5 * h) - g(x - 0.5 * h)) / h;
}

// minimize c.w subject to A w = b, w >= 0 by enumerating basic solutions.
// returns nullopt when no feasible basic point exists. exponential: only for
// small m, n.
struct lp_reference {
    bool feasible = false;
    double objective = 0;
    std::vector<double> x;
};

inline lp_reference lp_enumerate(int m, int n, const std::vector<double>& A,
                                 const std::vector<double>& b, const std::vector<double>& c) {
    lp_reference best;
    std::vector<int> pick(m);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == m) {
            Eigen::MatrixXd B(m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) B(i, j) = A[std::size_t(i) * n + pick[j]];
            Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
            if (!lu.isInvertible()) return;
            Eigen::VectorXd rhs(m);
            for (int i = 0; i < m; ++i) rhs(i) = b[i];
            Eigen::VectorXd w = lu.solve(rhs);
            double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
            for (int i = 0; i < m; ++i)
                if (w(i) < -1e-9 * scale) return;
            // feasibility of the full vector
            std::vector<double> full(n, 0.0);
            for (int i = 0; i < m; ++i) full[pick[i]] = std::max(0.0, w(i));
            for (int i = 0; i < m; ++i) {
                double got = 0;
                for (int j = 0; j < n; ++j) got += A[std::size_t(i) * n + j] * full[j];
                if (std::abs(got - b[i]) > 1e-7 * scale) return;
            }
            double obj = 0;
            for (int j = 0; j < n; ++j) obj += c[j] * full[j];
            if (!best.feasible || obj < best.objective) {
                best.feasible = true;
                best.objective = obj;
                best.x = full;
            }
            return;
        }
        for (int j = start; j <= n - (m - depth); ++j) {
            pick[depth] = j;
            rec(j + 1, depth + 1);
        }
    };
    if (m == 0) {
        best.feasible = true;
        best.x.assign(n, 0.0);
        return best;
    }
    rec(0, 0);
    // the zero vector is basic-degenerate and the recursion above can miss it
    bool zero_ok = true;
    for (int i = 0; i < m; ++i) zero_ok = zero_ok && b[i] == 0.0;
    if (zero_ok && (!best.feasible || best.objective > 0.0)) {
        best.feasible = true;
        best.objective = 0;
        best.x.assign(n, 0.0);
    }
    return best;
}

// extreme eigenvalues of a symmetric matrix given by matvec, via dense
// reconstruction (small problems only)
template <class Mat>
std::pair<double, double> dense_extreme_eigs(const Mat& A, int n) {
    Eigen::MatrixXd M(n, n);
    std::vector<double> e(n, 0.0), y(n);
    for (int j = 0; j < n; ++j) {
        e[j] = 1.0;
        A.matvec(e.data(), y.data());
        for (int i = 0; i < n; ++i) M(i, j) = y[i];
        e[j] = 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace oracle
