#pragma once

// particle transport: velocity fields, classic fixed-step RK4 advection that
// never touches the weights, escape handling against the domain, scattering
// of particle weights onto the basis, and the regularization solve.

#include "pmreg/operators.hpp"
#include "pmreg/quadrature.hpp"

namespace pmreg {

template <std::size_t D> struct velocity_field {
    std::function<vec<D>(const vec<D>&, double)> eval;
    bool rigid_rotation = false;  // enables the exact RK4 step matrix below
    double omega = 0;
};

inline velocity_field<2> make_rotation(double omega) {
    velocity_field<2> v;
    v.rigid_rotation = true;
    v.omega = omega;
    v.eval = [omega](const vec<2>& x, double) { return vec<2>{-omega * x[1], omega * x[0]}; };
    return v;
}

// largest |a . n| over facet midpoints; rigid rotations about the center of a
// regular polygon give exactly zero here
inline double max_normal_velocity(const velocity_field<2>& a, const boundary_mesh<2>& m,
                                  double t = 0) {
    double worst = 0;
    for (int i = 0; i < facet_count(m); ++i) {
        facet2 f = facet(m, i);
        vec<2> mid = 0.5 * (f.a + f.b);
        worst = std::max(worst, std::abs(dot(a.eval(mid, t), f.n)));
    }
    return worst;
}

template <std::size_t D>
inline vec<D> rk4_step(const velocity_field<D>& a, const vec<D>& x, double t, double dt) {
    vec<D> k1 = a.eval(x, t);
    vec<D> k2 = a.eval(x + (0.5 * dt) * k1, t + 0.5 * dt);
    vec<D> k3 = a.eval(x + (0.5 * dt) * k2, t + 0.5 * dt);
    vec<D> k4 = a.eval(x + dt * k3, t + dt);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// RK4 applied to the linear rotation field collapses to a fixed 2x2 matrix
// (the degree-4 taylor polynomial of the rotation); same map, fewer flops
struct rk4_rotation_step {
    double m00, m01, m10, m11;
    explicit rk4_rotation_step(double omega, double dt) {
        double a01 = -omega, a10 = omega;  // A = [[0,-w],[w,0]]
        double c2 = dt * dt / 2.0, c3 = dt * dt * dt / 6.0, c4 = dt * dt * dt * dt / 24.0;
        double w2 = -omega * omega;  // A^2 = w2 I, A^3 = w2 A, A^4 = w2^2 I
        m00 = 1.0 + c2 * w2 + c4 * w2 * w2;
        m11 = m00;
        m01 = dt * a01 + c3 * w2 * a01;
        m10 = dt * a10 + c3 * w2 * a10;
    }
    void apply(double& x, double& y) const {
        double nx = m00 * x + m01 * y;
        double ny = m10 * x + m11 * y;
        x = nx;
        y = ny;
    }
};

enum class escape_policy { keep_flag, project };

struct advect_options {
    double t0 = 0;
    double dt = 0.01;
    int steps = 1;
    escape_policy policy = escape_policy::keep_flag;
};

struct advect_stats {
    std::vector<double> step_weight_sums;  // recomputed in index order after every step
    std::int64_t escaped = 0;
    double t_end = 0;
};

template <std::size_t D>
advect_stats advect_particles(particle_field<D>& p, const velocity_field<D>& a,
                              const fictitious_domain<D>& fd, const advect_options& opt) {
    advect_stats st;
    st.step_weight_sums.push_back(p.weight_sum());
    const std::size_t np = p.size();
    if constexpr (D == 2) {
        if (a.rigid_rotation) {
            rk4_rotation_step step(a.omega, opt.dt);
            double* xs = p.x[0].data();
            double* ys = p.x[1].data();
            for (int s = 0; s < opt.steps; ++s) {
                for (std::size_t i = 0; i < np; ++i) step.apply(xs[i], ys[i]);
                st.step_weight_sums.push_back(p.weight_sum());
            }
        } else {
            for (int s = 0; s < opt.steps; ++s) {
                double t = opt.t0 + s * opt.dt;
                for (std::size_t i = 0; i < np; ++i) {
                    vec<2> x{p.x[0][i], p.x[1][i]};
                    x = rk4_step(a, x, t, opt.dt);
                    p.x[0][i] = x[0];
                    p.x[1][i] = x[1];
                }
                st.step_weight_sums.push_back(p.weight_sum());
            }
        }
    } else {
        for (int s = 0; s < opt.steps; ++s) {
            double t = opt.t0 + s * opt.dt;
            for (std::size_t i = 0; i < np; ++i) {
                vec<D> x;
                for (std::size_t d = 0; d < D; ++d) x[d] = p.x[d][i];
                x = rk4_step(a, x, t, opt.dt);
                for (std::size_t d = 0; d < D; ++d) p.x[d][i] = x[d];
            }
            st.step_weight_sums.push_back(p.weight_sum());
        }
    }
    st.t_end = opt.t0 + opt.steps * opt.dt;

    // escape handling once at the end: flagged by default, or projected back
    p.escaped.assign(np, 0);
    for (std::size_t i = 0; i < np; ++i) {
        vec<D> x;
        for (std::size_t d = 0; d < D; ++d) x[d] = p.x[d][i];
        if (fd.contains(x)) continue;
        ++st.escaped;
        if (opt.policy == escape_policy::project) {
            vec<D> y = project_to_boundary(fd.mesh, x);
            for (std::size_t d = 0; d < D; ++d) p.x[d][i] = y[d];
        } else {
            p.escaped[i] = 1;
        }
    }
    return st;
}

// rhs_mu = sum_i U_i b_mu(x_i); particles outside the grid window are skipped
template <std::size_t D>
std::vector<double> scatter_particles(const spline_space<D>& s, const particle_field<D>& p) {
    std::vector<double> rhs(s.count(), 0.0);
    idx<D> zero{};
    for (std::size_t i = 0; i < p.size(); ++i) {
        vec<D> x;
        for (std::size_t d = 0; d < D; ++d) x[d] = p.x[d][i];
        double u = p.u[i];
        for_each_active(s, x, zero, [&](std::int32_t r, double v) { rhs[r] += u * v; });
    }
    return rhs;
}

// regularization: solve (A + eps J) c = <particles, b_mu>
template <std::size_t D>
spline_field<D> regularize(const particle_field<D>& p, const moment_table<D>& mt,
                           const ghost_penalty<D>& J, double eps, solve_report& rep,
                           double tol = 1e-12) {
    std::vector<double> rhs = scatter_particles(*mt.space, p);
    return approximate_extension(mt, J, eps, rhs, rep, tol);
}

}  // namespace pmreg
