#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hamts/expr.hpp"
#include "hamts/linalg.hpp"
#include "hamts/timescale.hpp"

namespace hamts {

using MatrixFn = std::function<Matrix(double)>;

// Coefficient data of the Hamiltonian system: d x d evaluators for A, B, C and
// the weight blocks W1, W2, plus the assembled views P(t), W(t) and constant J.
// Validated at construction: B, C, W1, W2 Hermitian and W1, W2 >= 0 at every
// sample point, and I - nu(t) A(t) invertible along the sample grid.
struct CoefficientField {
    int d = 0;
    MatrixFn A, B, C, W1, W2;
    bool real_coefficients = false;

    Matrix P(double t) const {
        Matrix p(2 * d, 2 * d);
        Matrix a = A(t);
        p.topLeftCorner(d, d) = -C(t);
        p.topRightCorner(d, d) = a.adjoint();
        p.bottomLeftCorner(d, d) = a;
        p.bottomRightCorner(d, d) = B(t);
        return p;
    }

    Matrix W(double t) const {
        Matrix w = Matrix::Zero(2 * d, 2 * d);
        w.topLeftCorner(d, d) = W1(t);
        w.bottomRightCorner(d, d) = W2(t);
        return w;
    }

    Matrix J() const { return symplectic_J(d); }
};

inline std::vector<Expr> parse_matrix(int d, const std::vector<std::string>& entries,
                                      const std::string& name) {
    if (static_cast<int>(entries.size()) != d * d)
        throw ValidationError(name + ": expected " + std::to_string(d * d) +
                              " row-major entries, got " + std::to_string(entries.size()));
    std::vector<Expr> out;
    out.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        try {
            out.push_back(Expr::parse(entries[k]));
        } catch (const ParseError& e) {
            throw ValidationError(name + "[" + std::to_string(k / d) + "][" +
                                  std::to_string(k % d) + "]: " + e.what());
        }
    }
    return out;
}

inline MatrixFn expr_matrix(int d, std::vector<Expr> entries) {
    return [d, entries = std::move(entries)](double t) {
        Matrix m(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) m(r, c) = entries[static_cast<std::size_t>(r * d + c)].eval(t);
        return m;
    };
}

namespace detail {

inline bool matrix_is_real(const Matrix& m, double tol = 1e-14) {
    return m.imag().cwiseAbs().maxCoeff() <= tol;
}

inline void validate_field(CoefficientField& f, const Grid& sample_grid, double tol) {
    bool real = true;
    for (const auto& gp : sample_grid.points) {
        double t = gp.t;
        Matrix a = f.A(t), b = f.B(t), c = f.C(t), w1 = f.W1(t), w2 = f.W2(t);
        auto check_shape = [&](const Matrix& m, const char* name) {
            if (m.rows() != f.d || m.cols() != f.d)
                throw ValidationError(std::string(name) + ": evaluator returned wrong shape at t = " +
                                      detail::fmt(t));
        };
        check_shape(a, "A"); check_shape(b, "B"); check_shape(c, "C");
        check_shape(w1, "W1"); check_shape(w2, "W2");
        auto check_herm = [&](const Matrix& m, const char* name) {
            if (herm_residual(m) > tol)
                throw ValidationError(std::string(name) + " is not Hermitian at t = " +
                                      detail::fmt(t) + " (residual " +
                                      std::to_string(herm_residual(m)) + ")");
        };
        check_herm(b, "B"); check_herm(c, "C"); check_herm(w1, "W1"); check_herm(w2, "W2");
        if (min_eig_herm(w1) < -tol)
            throw ValidationError("W1 is indefinite at t = " + detail::fmt(t) +
                                  " (min eigenvalue " + std::to_string(min_eig_herm(w1)) + ")");
        if (min_eig_herm(w2) < -tol)
            throw ValidationError("W2 is indefinite at t = " + detail::fmt(t) +
                                  " (min eigenvalue " + std::to_string(min_eig_herm(w2)) + ")");
        Matrix ema = Matrix::Identity(f.d, f.d) - gp.nu * a;
        Eigen::FullPivLU<Matrix> lu(ema);
        if (!lu.isInvertible())
            throw ValidationError("I - nu*A is singular at t = " + detail::fmt(t) +
                                  " (nu = " + detail::fmt(gp.nu) + ")");
        real = real && matrix_is_real(a) && matrix_is_real(b) && matrix_is_real(c) &&
               matrix_is_real(w1) && matrix_is_real(w2);
    }
    f.real_coefficients = real;
}

}  // namespace detail

inline CoefficientField build_coefficients(int d, MatrixFn A, MatrixFn B, MatrixFn C,
                                           MatrixFn W1, MatrixFn W2, const Grid& sample_grid,
                                           double tol = 1e-10) {
    if (d < 1) throw ValidationError("coefficients: dimension must be positive");
    CoefficientField f;
    f.d = d;
    f.A = std::move(A);
    f.B = std::move(B);
    f.C = std::move(C);
    f.W1 = std::move(W1);
    f.W2 = std::move(W2);
    detail::validate_field(f, sample_grid, tol);
    return f;
}

inline CoefficientField build_coefficients(int d, const std::vector<std::string>& A,
                                           const std::vector<std::string>& B,
                                           const std::vector<std::string>& C,
                                           const std::vector<std::string>& W1,
                                           const std::vector<std::string>& W2,
                                           const Grid& sample_grid, double tol = 1e-10) {
    return build_coefficients(d, expr_matrix(d, parse_matrix(d, A, "A")),
                              expr_matrix(d, parse_matrix(d, B, "B")),
                              expr_matrix(d, parse_matrix(d, C, "C")),
                              expr_matrix(d, parse_matrix(d, W1, "W1")),
                              expr_matrix(d, parse_matrix(d, W2, "W2")), sample_grid, tol);
}

// Reduction of the formally self-adjoint 2n-th order Sturm-Liouville operator
// with coefficients p_0, ..., p_n to first-order Hamiltonian form:
//   A = strict upper shift, B = diag{0, ..., 0, 1/p_n(rho(t))},
//   C = diag{p_0(t), p_1(rho(t)), ..., p_{n-1}(rho(t))},
// spectral weight W1 = e_1 e_1^T (eigenvalue multiplies y itself), W2 = 0.
inline CoefficientField from_sturm_liouville(int n, const std::vector<Expr>& p,
                                             const TimeScale& ts, const Grid& sample_grid,
                                             double tol = 1e-10) {
    if (n < 1) throw ValidationError("sturm_liouville: order n must be >= 1");
    if (static_cast<int>(p.size()) != n + 1)
        throw ValidationError("sturm_liouville: expected n+1 coefficients p0..pn, got " +
                              std::to_string(p.size()));
    const int d = n;
    MatrixFn A = [d](double) {
        Matrix a = Matrix::Zero(d, d);
        for (int i = 0; i + 1 < d; ++i) a(i, i + 1) = 1.0;
        return a;
    };
    // capture the scale by value: the evaluators outlive the caller's object
    auto rho_of = [ts](double t) { return ts.jumps(t).rho; };
    Expr pn = p.back();
    MatrixFn B = [d, pn, rho_of](double t) {
        Matrix b = Matrix::Zero(d, d);
        cxd v = pn.eval(rho_of(t));
        if (v == cxd(0.0, 0.0))
            throw NumericalError("p_n vanishes at rho(t), t = " + detail::fmt(t));
        b(d - 1, d - 1) = 1.0 / v;
        return b;
    };
    std::vector<Expr> plow(p.begin(), p.end() - 1);
    MatrixFn C = [d, plow, rho_of](double t) {
        Matrix c = Matrix::Zero(d, d);
        c(0, 0) = plow[0].eval(t);
        for (int i = 1; i < d; ++i) c(i, i) = plow[static_cast<std::size_t>(i)].eval(rho_of(t));
        return c;
    };
    MatrixFn W1 = [d](double) {
        Matrix w = Matrix::Zero(d, d);
        w(0, 0) = 1.0;
        return w;
    };
    MatrixFn W2 = [d](double) { return Matrix::Zero(d, d); };
    try {
        return build_coefficients(d, std::move(A), std::move(B), std::move(C), std::move(W1),
                                  std::move(W2), sample_grid, tol);
    } catch (const NumericalError& e) {
        throw ValidationError(std::string("sturm_liouville: ") + e.what());
    }
}

inline CoefficientField from_sturm_liouville(int n, const std::vector<std::string>& p,
                                             const TimeScale& ts, const Grid& sample_grid,
                                             double tol = 1e-10) {
    std::vector<Expr> exprs;
    exprs.reserve(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        try {
            exprs.push_back(Expr::parse(p[k]));
        } catch (const ParseError& e) {
            throw ValidationError("sturm_liouville: p" + std::to_string(k) + ": " + e.what());
        }
    }
    return from_sturm_liouville(n, exprs, ts, sample_grid, tol);
}

}  // namespace hamts
