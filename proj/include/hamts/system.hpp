#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "hamts/coefficients.hpp"

namespace hamts {

// First-order propagation matrix of the system at a point (t, lambda):
//   S = [[A - nu (B+lW2) E* (C-lW1),  (B+lW2) E*],
//        [E* (C-lW1),                 -E* A*   ]],   E = (I - nu A)^{-1}.
// S_conj is the same matrix at conj(lambda); the nu-regressivity identity
// couples the two: (I - nu S_conj)* J (I - nu S) = J.
struct SystemMatrix {
    Matrix S;
    Matrix S_conj;
    Matrix E;
    double t = 0;
    double nu = 0;
    cxd lambda;
};

// Core formula; nu is passed explicitly so dense integrators can evaluate at
// interior points (nu = 0) without a scale lookup.
inline Matrix system_S(const CoefficientField& f, double t, double nu, cxd lambda,
                       Matrix* E_out = nullptr) {
    const int d = f.d;
    Matrix a = f.A(t);
    Matrix bw = f.B(t) + lambda * f.W2(t);
    Matrix cw = f.C(t) - lambda * f.W1(t);
    Matrix E;
    if (nu == 0.0) {
        E = Matrix::Identity(d, d);
    } else {
        Matrix ema = Matrix::Identity(d, d) - nu * a;
        Eigen::FullPivLU<Matrix> lu(ema);
        if (!lu.isInvertible())
            throw NumericalError("I - nu*A singular at t = " + detail::fmt(t));
        E = lu.inverse();
    }
    Matrix Ead = E.adjoint();
    Matrix s(2 * d, 2 * d);
    s.topLeftCorner(d, d) = a - nu * bw * Ead * cw;
    s.topRightCorner(d, d) = bw * Ead;
    s.bottomLeftCorner(d, d) = Ead * cw;
    s.bottomRightCorner(d, d) = -Ead * a.adjoint();
    if (E_out) *E_out = E;
    return s;
}

inline SystemMatrix assemble_system(const CoefficientField& f, const TimeScale& ts, double t,
                                    cxd lambda) {
    SystemMatrix sm;
    sm.t = ts.snap(t);
    sm.nu = ts.jumps(sm.t).nu;
    sm.lambda = lambda;
    sm.S = system_S(f, sm.t, sm.nu, lambda, &sm.E);
    sm.S_conj = (lambda.imag() == 0.0) ? sm.S : system_S(f, sm.t, sm.nu, std::conj(lambda));
    return sm;
}

// Frobenius norm of (I - nu S(conj lambda))* J (I - nu S(lambda)) - J.  Also
// certifies that the backward step matrix I - nu S is invertible.
inline double regressivity_residual(const SystemMatrix& sm) {
    const auto n = sm.S.rows();
    Matrix J = symplectic_J(static_cast<int>(n) / 2);
    Matrix U = Matrix::Identity(n, n) - sm.nu * sm.S;
    Matrix Uc = Matrix::Identity(n, n) - sm.nu * sm.S_conj;
    Eigen::FullPivLU<Matrix> lu(U);
    if (!lu.isInvertible())
        throw NumericalError("I - nu*S singular at t = " + detail::fmt(sm.t));
    return (Uc.adjoint() * J * U - J).norm();
}

// A 2d-vector path sampled on a grid.
struct SampledPath {
    Grid grid;
    std::vector<Vector> values;
};

enum class ShiftDir { left, right };

namespace detail {

// Partial left shift of matrix samples at grid index k: top d rows at t_k,
// bottom d rows at rho(t_k) (the previous sample when t_k is scattered).
inline Matrix shifted_sample(const std::vector<Matrix>& samples, const Grid& g, std::size_t k) {
    const auto rows = samples[k].rows();
    if (g.nu(k) == 0.0 || k == 0) return samples[k];
    Matrix out = samples[k];
    out.bottomRows(rows / 2) = samples[k - 1].bottomRows(rows / 2);
    return out;
}

inline Vector shifted_vec(const std::vector<Vector>& samples, const Grid& g, std::size_t k) {
    const auto rows = samples[k].rows();
    if (g.nu(k) == 0.0 || k == 0) return samples[k];
    Vector out = samples[k];
    out.tail(rows / 2) = samples[k - 1].tail(rows / 2);
    return out;
}

}  // namespace detail

// Partial shift operators: left replaces the lower block by its value at
// rho(t), right by its value at sigma(t).  The right shift exists only on
// Sturmian scales; at the truncated endpoint sigma(horizon) = horizon.
inline SampledPath apply_shift(const SampledPath& y, ShiftDir dir) {
    if (dir == ShiftDir::right && !y.grid.sturmian)
        throw ValidationError("right shift unavailable: scale is not Sturmian");
    SampledPath out = y;
    const auto n = y.values.empty() ? 0 : y.values.front().rows();
    for (std::size_t k = 0; k < y.values.size(); ++k) {
        if (dir == ShiftDir::left) {
            if (y.grid.nu(k) > 0.0 && k > 0)
                out.values[k].tail(n / 2) = y.values[k - 1].tail(n / 2);
        } else {
            bool right_scattered = (k + 1 < y.values.size() && y.grid.nu(k + 1) > 0.0);
            if (right_scattered) out.values[k].tail(n / 2) = y.values[k + 1].tail(n / 2);
        }
    }
    return out;
}

}  // namespace hamts
