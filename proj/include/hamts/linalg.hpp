#pragma once

#include <Eigen/Dense>
#include <complex>

#include "hamts/errors.hpp"

namespace hamts {

using cxd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Canonical symplectic matrix J = [[0, -I_d], [I_d, 0]], size 2d x 2d.
inline Matrix symplectic_J(int d) {
    Matrix J = Matrix::Zero(2 * d, 2 * d);
    J.topRightCorner(d, d) = -Matrix::Identity(d, d);
    J.bottomLeftCorner(d, d) = Matrix::Identity(d, d);
    return J;
}

inline double herm_residual(const Matrix& m) { return (m - m.adjoint()).norm(); }

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

// Skew part divided by i: (m - m*)/(2i).  For a Weyl matrix this is "Im M".
inline Matrix imag_part_matrix(const Matrix& m) {
    return (m - m.adjoint()) / cxd(0.0, 2.0);
}

inline Eigen::VectorXd herm_eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(m));
    return es.eigenvalues();
}

inline double min_eig_herm(const Matrix& m) { return herm_eigenvalues(m).minCoeff(); }
inline double max_eig_herm(const Matrix& m) { return herm_eigenvalues(m).maxCoeff(); }

// Hermitian matrix power via eigendecomposition. Eigenvalues are clamped at
// `floor` before a negative power is applied; values at or below the floor
// with a negative exponent are rejected.
inline Matrix herm_power(const Matrix& m, double p, double floor = 1e-14) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(m));
    Eigen::VectorXd ev = es.eigenvalues();
    Eigen::VectorXd pw(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        double v = ev(i);
        if (p < 0 && v <= floor)
            throw NumericalError(
                "hermitian power: eigenvalue " + std::to_string(v) +
                " at or below floor; matrix numerically singular");
        pw(i) = std::pow(std::max(v, 0.0), p);
    }
    return es.eigenvectors() * pw.asDiagonal().toDenseMatrix().cast<cxd>() *
           es.eigenvectors().adjoint();
}

inline Matrix herm_sqrt(const Matrix& m) { return herm_power(m, 0.5); }
inline Matrix herm_inv_sqrt(const Matrix& m, double floor = 1e-14) {
    return herm_power(m, -0.5, floor);
}

}  // namespace hamts
