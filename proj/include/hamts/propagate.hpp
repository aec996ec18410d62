#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "hamts/system.hpp"

namespace hamts {

struct PropagateOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = 0.0;  // 0 = unlimited; used by order-check tests
};

namespace detail {

// Dormand-Prince 5(4) on the matrix linear system Y' = S(t) Y with
// componentwise mixed error control.  Steps never cross t1.
template <class SFn>
inline void dp45_integrate(SFn&& Sfn, double t0, double t1, Matrix& Y,
                           const PropagateOptions& opt) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (!(t1 > t0)) return;
    double t = t0;
    double h = t1 - t0;
    if (opt.max_step > 0) h = std::min(h, opt.max_step);
    int rejected_in_a_row = 0;
    while (t < t1) {
        h = std::min(h, t1 - t);
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw NumericalError("dense integrator: step-size underflow at t = " +
                                 detail::fmt(t));
        Matrix k1 = Sfn(t) * Y;
        Matrix k2 = Sfn(t + c2 * h) * (Y + h * (a21 * k1));
        Matrix k3 = Sfn(t + c3 * h) * (Y + h * (a31 * k1 + a32 * k2));
        Matrix k4 = Sfn(t + c4 * h) * (Y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        Matrix k5 = Sfn(t + c5 * h) * (Y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Matrix k6 =
            Sfn(t + h) * (Y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Matrix Ynew = Y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Matrix k7 = Sfn(t + h) * Ynew;
        Matrix err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double norm = 0.0;
        for (Eigen::Index r = 0; r < Y.rows(); ++r)
            for (Eigen::Index c = 0; c < Y.cols(); ++c) {
                double sc = opt.atol +
                            opt.rtol * std::max(std::abs(Y(r, c)), std::abs(Ynew(r, c)));
                norm = std::max(norm, std::abs(err(r, c)) / sc);
            }
        if (norm <= 1.0) {
            t += h;
            Y = std::move(Ynew);
            rejected_in_a_row = 0;
        } else if (++rejected_in_a_row > 64) {
            throw NumericalError("dense integrator: repeated step rejection at t = " +
                                 detail::fmt(t));
        }
        double factor = (norm == 0.0) ? 5.0
                                      : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
        h *= factor;
        if (opt.max_step > 0) h = std::min(h, opt.max_step);
    }
}

}  // namespace detail

// Fundamental-matrix samples of y^nabla = S(t, lambda) y along a grid.
struct Trajectory {
    Grid grid;
    cxd lambda;
    std::vector<Matrix> samples;

    const Matrix& initial() const { return samples.front(); }
    const Matrix& at(std::size_t k) const { return samples[k]; }
    // Partial left shift applied to the sample at grid index k.
    Matrix shifted(std::size_t k) const {
        return detail::shifted_sample(samples, grid, k);
    }
};

// Propagate with samples stored at every grid point.  Scattered steps solve
// (I - nu S) Phi(t) = Phi(rho(t)); dense stretches run the adaptive DP45
// integrator between consecutive grid points.
inline Trajectory propagate_fundamental(const CoefficientField& f, cxd lambda,
                                        const Matrix& initial, const Grid& grid,
                                        const PropagateOptions& opt = {}) {
    Trajectory tr;
    tr.grid = grid;
    tr.lambda = lambda;
    tr.samples.reserve(grid.size());
    Matrix Y = initial;
    tr.samples.push_back(Y);
    auto Sdense = [&](double t) { return system_S(f, t, 0.0, lambda); };
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (grid.nu(k) > 0.0) {
            Matrix U = Matrix::Identity(Y.rows(), Y.rows()) -
                       grid.nu(k) * system_S(f, grid.t(k), grid.nu(k), lambda);
            Eigen::FullPivLU<Matrix> lu(U);
            if (!lu.isInvertible())
                throw NumericalError("I - nu*S singular at t = " + detail::fmt(grid.t(k)));
            Y = lu.solve(Y);
        } else {
            detail::dp45_integrate(Sdense, grid.t(k - 1), grid.t(k), Y, opt);
        }
        tr.samples.push_back(Y);
    }
    return tr;
}

// Endpoint-only propagation: dense stretches are integrated whole, with no
// per-point sample storage.  Used by eigenvalue scans where only Phi(b)
// matters.
inline Matrix propagate_endpoint(const CoefficientField& f, cxd lambda, const Matrix& initial,
                                 const Grid& grid, const PropagateOptions& opt = {}) {
    Matrix Y = initial;
    auto Sdense = [&](double t) { return system_S(f, t, 0.0, lambda); };
    std::size_t k = 1;
    while (k < grid.size()) {
        if (grid.nu(k) > 0.0) {
            Matrix U = Matrix::Identity(Y.rows(), Y.rows()) -
                       grid.nu(k) * system_S(f, grid.t(k), grid.nu(k), lambda);
            Eigen::FullPivLU<Matrix> lu(U);
            if (!lu.isInvertible())
                throw NumericalError("I - nu*S singular at t = " + detail::fmt(grid.t(k)));
            Y = lu.solve(Y);
            ++k;
        } else {
            std::size_t j = detail::dense_run_end(grid, k);
            detail::dp45_integrate(Sdense, grid.t(k - 1), grid.t(j), Y, opt);
            k = j + 1;
        }
    }
    return Y;
}

// Scalar nabla exponential e_q(t_end, rho(t0)): solves x^nabla = q x with
// x(rho(t0)) = 1.  Scattered steps divide by 1 - nu q(t); dense stretches
// multiply by exp of the integral of q.
inline cxd nabla_exponential(const std::function<cxd(double)>& q, const TimeScale& ts,
                             double t_end, double h = 0.0) {
    double start = ts.jumps(ts.t0()).rho;
    if (h <= 0.0) h = std::max((ts.snap(t_end) - start) / 1024.0, 1e-12);
    Grid g = make_grid(ts, start, t_end, h);
    cxd x(1.0, 0.0);
    std::size_t k = 1;
    while (k < g.size()) {
        if (g.nu(k) > 0.0) {
            cxd den = 1.0 - g.nu(k) * q(g.t(k));
            if (std::abs(den) < 1e-14)
                throw NumericalError("nabla exponential: q not nu-regressive at t = " +
                                     detail::fmt(g.t(k)));
            x /= den;
            ++k;
        } else {
            std::size_t j = detail::dense_run_end(g, k);
            cxd acc(0.0, 0.0);
            for (std::size_t i = k; i <= j; ++i) {
                double dt = g.t(i) - g.t(i - 1);
                acc += (dt / 6.0) *
                       (q(g.t(i - 1)) + 4.0 * q(0.5 * (g.t(i - 1) + g.t(i))) + q(g.t(i)));
            }
            x *= std::exp(acc);
            k = j + 1;
        }
    }
    return x;
}

namespace detail {

inline void check_matching_grids(const Grid& a, const Grid& b, const char* what) {
    if (a.size() != b.size())
        throw ValidationError(std::string(what) + ": grids differ in size");
    for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a.t(k) - b.t(k)) > match_tol(a.t(k)))
            throw ValidationError(std::string(what) + ": grids differ at index " +
                                  std::to_string(k));
}

}  // namespace detail

// sup_t || Y*(t, conj lambda) J Y(t, lambda) - Y0*(conj) J Y0 ||_F.
// Constant along trajectories by the Wronskian-type identity; the residual
// measures integrator drift.
inline double symplectic_residual(const Trajectory& traj, const Trajectory& traj_conj) {
    detail::check_matching_grids(traj.grid, traj_conj.grid, "symplectic_residual");
    if (std::abs(traj_conj.lambda - std::conj(traj.lambda)) >
        1e-12 * std::max(1.0, std::abs(traj.lambda)))
        throw ValidationError("symplectic_residual: second trajectory must be at conj(lambda)");
    Matrix J = symplectic_J(static_cast<int>(traj.initial().rows()) / 2);
    Matrix ref = traj_conj.initial().adjoint() * J * traj.initial();
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.samples.size(); ++k)
        worst = std::max(worst,
                         (traj_conj.samples[k].adjoint() * J * traj.samples[k] - ref).norm());
    return worst;
}

// sup_t |det(Phi* Phi) - 1| for a trajectory with identity initial value.
inline double liouville_residual(const Trajectory& traj) {
    const auto n = traj.initial().rows();
    if ((traj.initial() - Matrix::Identity(n, n)).norm() > 1e-12)
        throw ValidationError("liouville_residual: trajectory must start at the identity");
    double worst = 0.0;
    for (const auto& s : traj.samples)
        worst = std::max(worst, std::abs((s.adjoint() * s).determinant() - 1.0));
    return worst;
}

namespace detail {

// Nabla derivative of sampled values: exact backward quotient at scattered
// points, finite-difference stencils on uniform dense runs (order 4 when the
// run has >= 5 points, order 2 otherwise).  Index 0 is left untouched when no
// one-sided rule applies; integrals over (a, b] never consume it.
template <class V>
inline std::vector<V> nabla_derivative_samples(const Grid& g, const std::vector<V>& v) {
    std::vector<V> out(v.size(), v.front() - v.front());
    for (std::size_t k = 1; k < g.size(); ++k)
        if (g.nu(k) > 0.0) out[k] = (v[k] - v[k - 1]) / g.nu(k);

    // dense runs: indices p..q with nu == 0 on (p, q]
    std::size_t k = 1;
    while (k < g.size()) {
        if (g.nu(k) > 0.0) {
            ++k;
            continue;
        }
        std::size_t p = k - 1;
        std::size_t q = detail::dense_run_end(g, k);
        double dt = g.t(p + 1) - g.t(p);
        std::size_t m = q - p + 1;
        auto at = [&](std::size_t i) -> const V& { return v[p + i]; };
        auto set = [&](std::size_t i, const V& d) {
            if (p + i == 0 || g.nu(p + i) == 0.0) out[p + i] = d;  // keep scattered rule at p
        };
        if (m >= 5) {
            set(0, (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) /
                       (12.0 * dt));
            set(1, (-3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4)) /
                       (12.0 * dt));
            for (std::size_t i = 2; i + 2 < m; ++i)
                set(i, (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * dt));
            set(m - 2, (3.0 * at(m - 1) + 10.0 * at(m - 2) - 18.0 * at(m - 3) +
                        6.0 * at(m - 4) - at(m - 5)) /
                           (12.0 * dt));
            set(m - 1, (25.0 * at(m - 1) - 48.0 * at(m - 2) + 36.0 * at(m - 3) -
                        16.0 * at(m - 4) + 3.0 * at(m - 5)) /
                           (12.0 * dt));
        } else if (m >= 3) {
            set(0, (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dt));
            for (std::size_t i = 1; i + 1 < m; ++i) set(i, (at(i + 1) - at(i - 1)) / (2.0 * dt));
            set(m - 1, (3.0 * at(m - 1) - 4.0 * at(m - 2) + at(m - 3)) / (2.0 * dt));
        } else {
            set(0, (at(1) - at(0)) / dt);
            set(1, (at(1) - at(0)) / dt);
        }
        k = q + 1;
    }
    return out;
}

}  // namespace detail

// Lagrange identity residual for sampled paths x, y over [a, b]:
//   | int_(a,b] {(Ux)* Ly - (Lx)* Uy} nabla t  -  [x* J y]_a^b |
// with L y = J y^nabla - P Uy.
inline double lagrange_residual(const SampledPath& x, const SampledPath& y,
                                const CoefficientField& f, double a, double b) {
    detail::check_matching_grids(x.grid, y.grid, "lagrange_residual");
    const Grid& g = x.grid;
    if (std::abs(g.a() - a) > detail::match_tol(a) || std::abs(g.b() - b) > detail::match_tol(b))
        throw ValidationError("lagrange_residual: paths are not sampled over [a, b]");
    SampledPath ux = apply_shift(x, ShiftDir::left);
    SampledPath uy = apply_shift(y, ShiftDir::left);
    std::vector<Vector> dx = detail::nabla_derivative_samples(g, x.values);
    std::vector<Vector> dy = detail::nabla_derivative_samples(g, y.values);
    Matrix J = f.J();
    std::vector<cxd> integrand(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        Matrix P = f.P(g.t(k));
        Vector Ly = J * dy[k] - P * uy.values[k];
        Vector Lx = J * dx[k] - P * ux.values[k];
        integrand[k] = (ux.values[k].adjoint() * Ly).value() -
                       (Lx.adjoint() * uy.values[k]).value();
    }
    cxd I = nabla_integrate_samples(g, integrand);
    cxd boundary = (x.values.back().adjoint() * J * y.values.back()).value() -
                   (x.values.front().adjoint() * J * y.values.front()).value();
    return std::abs(I - boundary);
}

// y(t) = Phi(t) * coef as a sampled path.
inline SampledPath path_from_trajectory(const Trajectory& tr, const Vector& coef) {
    SampledPath p;
    p.grid = tr.grid;
    p.values.reserve(tr.samples.size());
    for (const auto& s : tr.samples) p.values.push_back(s * coef);
    return p;
}

}  // namespace hamts
