#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hamts/regular.hpp"

namespace hamts {

// Weyl solution basis Y = (theta, phi) with Y(rho(t0)) = Omega = (alpha*, J alpha*):
// alpha theta(rho(t0)) = I, alpha phi(rho(t0)) = 0, Omega symplectic and unitary.
struct WeylBasis {
    Trajectory Y;
    Matrix Omega;
    Matrix alpha;
    int d = 0;

    cxd lambda() const { return Y.lambda; }
    double b() const { return Y.grid.b(); }
    Matrix theta_end() const { return Y.samples.back().leftCols(d); }
    Matrix phi_end() const { return Y.samples.back().rightCols(d); }
};

inline Matrix weyl_omega(const Matrix& alpha) {
    const auto d = alpha.rows();
    Matrix J = symplectic_J(static_cast<int>(d));
    Matrix omega(2 * d, 2 * d);
    omega.leftCols(d) = alpha.adjoint();
    omega.rightCols(d) = J * alpha.adjoint();
    return omega;
}

inline WeylBasis build_Y(const CoefficientField& f, const BoundaryPair& bp, cxd lambda,
                         const Grid& grid, const PropagateOptions& opt = {}) {
    WeylBasis wb;
    wb.d = bp.d;
    wb.alpha = bp.alpha;
    wb.Omega = weyl_omega(bp.alpha);
    wb.Y = propagate_fundamental(f, lambda, wb.Omega, grid, opt);
    return wb;
}

// Hermitian matrix F(b, lambda) = -+ i Y*(b) J Y(b) (upper sign for Im > 0),
// with the blocks of the Weyl disk inequality and the residual against the
// independent integral form -+ iJ + 2|Im lambda| int (UY)* W (UY) nabla t.
struct WeylData {
    Matrix F, F11, F12, F22;
    double b = 0;
    cxd lambda;
    double dual_residual = 0;
};

inline WeylData weyl_F(const CoefficientField& f, const WeylBasis& basis) {
    cxd lambda = basis.lambda();
    if (lambda.imag() == 0.0)
        throw ValidationError("weyl_F: Im lambda must be nonzero");
    const int d = basis.d;
    Matrix J = symplectic_J(d);
    double sgn = lambda.imag() > 0 ? -1.0 : 1.0;
    const Matrix& Yb = basis.Y.samples.back();
    WeylData wd;
    wd.b = basis.b();
    wd.lambda = lambda;
    wd.F = cxd(0.0, sgn) * (Yb.adjoint() * J * Yb);

    std::vector<Matrix> integrand(basis.Y.samples.size());
    for (std::size_t k = 0; k < basis.Y.samples.size(); ++k) {
        Matrix uy = basis.Y.shifted(k);
        integrand[k] = uy.adjoint() * f.W(basis.Y.grid.t(k)) * uy;
    }
    Matrix Kb = nabla_integrate_samples(basis.Y.grid, integrand);
    Matrix Fint = cxd(0.0, sgn) * J + 2.0 * std::abs(lambda.imag()) * Kb;
    wd.dual_residual = (wd.F - Fint).norm();

    wd.F11 = wd.F.topLeftCorner(d, d);
    wd.F12 = wd.F.topRightCorner(d, d);
    wd.F22 = wd.F.bottomRightCorner(d, d);
    return wd;
}

// Endpoint-only variant used where many b values are swept.
inline WeylData weyl_F_endpoint(const CoefficientField& f, const BoundaryPair& bp, cxd lambda,
                                const TimeScale& ts, double b, const SpectrumOptions& opt = {}) {
    if (lambda.imag() == 0.0)
        throw ValidationError("weyl_F: Im lambda must be nonzero");
    Grid g = detail::problem_grid(ts, b, opt);
    Matrix Yb = propagate_endpoint(f, lambda, weyl_omega(bp.alpha), g, opt.prop);
    const int d = bp.d;
    double sgn = lambda.imag() > 0 ? -1.0 : 1.0;
    WeylData wd;
    wd.b = g.b();
    wd.lambda = lambda;
    wd.F = cxd(0.0, sgn) * (Yb.adjoint() * symplectic_J(d) * Yb);
    wd.F11 = wd.F.topLeftCorner(d, d);
    wd.F12 = wd.F.topRightCorner(d, d);
    wd.F22 = wd.F.bottomRightCorner(d, d);
    return wd;
}

// Center and matrix radii of the Weyl disk at level b:
//   center = -F22^{-1} F12*,  radiusL = F22(lambda)^{-1/2},
//   radiusR = F22(conj lambda)^{-1/2}.
struct WeylDisk {
    Matrix center, radiusL, radiusR;
    double b = 0;
    cxd lambda;
};

inline WeylDisk weyl_disk(const WeylData& wd, const WeylData& wd_conj) {
    if (std::abs(wd_conj.lambda - std::conj(wd.lambda)) >
        1e-12 * std::max(1.0, std::abs(wd.lambda)))
        throw ValidationError("weyl_disk: second argument must be at conj(lambda)");
    if (std::abs(wd_conj.b - wd.b) > detail::match_tol(wd.b))
        throw ValidationError("weyl_disk: both F matrices must share b");
    double floor = 1e-14;
    if (min_eig_herm(wd.F22) <= floor || min_eig_herm(wd_conj.F22) <= floor)
        throw NumericalError("weyl_disk: F22 numerically singular (b below t1?)");
    WeylDisk disk;
    disk.b = wd.b;
    disk.lambda = wd.lambda;
    disk.center = -wd.F22.fullPivLu().solve(wd.F12.adjoint());
    disk.radiusL = herm_inv_sqrt(wd.F22, floor);
    disk.radiusR = herm_inv_sqrt(wd_conj.F22, floor);
    return disk;
}

// A point of the Weyl circle: center + radiusL U radiusR for unitary U (any
// contraction V in place of U gives a disk point).
inline Matrix circle_point(const WeylDisk& disk, const Matrix& U) {
    return disk.center + disk.radiusL * U * disk.radiusR;
}

// Weyl-Titchmarsh matrix M(lambda, b) = -(beta phi(b))^{-1} beta theta(b).
inline Matrix m_function(const WeylBasis& basis, const Matrix& beta) {
    Matrix bphi = beta * basis.phi_end();
    Eigen::FullPivLU<Matrix> lu(bphi);
    if (!lu.isInvertible())
        throw NumericalError("m_function: beta*phi(b) singular (real lambda at an eigenvalue?)");
    return -lu.solve(beta * basis.theta_end());
}

// Largest eigenvalue of C(M, b) = (I, M*) F(b, lambda) (I; M); <= 0 means M
// lies in the Weyl disk at level b.
inline double disk_membership(const Matrix& Mtest, const WeylData& wd) {
    const auto d = Mtest.rows();
    Matrix stack(2 * d, d);
    stack.topRows(d) = Matrix::Identity(d, d);
    stack.bottomRows(d) = Mtest;
    return max_eig_herm(stack.adjoint() * wd.F * stack);
}

// Slack of the truncated-norm bound for chi = Y (I; M):
//   int (U chi)* W (U chi) nabla t  <=  +- Im M / |Im lambda|
// returned as the largest eigenvalue of (LHS - RHS); <= tol means the bound
// holds.
inline double truncated_norm_bound_slack(const CoefficientField& f, const WeylBasis& basis,
                                         const Matrix& M) {
    const int d = basis.d;
    Matrix stack(2 * d, d);
    stack.topRows(d) = Matrix::Identity(d, d);
    stack.bottomRows(d) = M;
    std::vector<Matrix> integrand(basis.Y.samples.size());
    for (std::size_t k = 0; k < basis.Y.samples.size(); ++k) {
        Matrix uchi = basis.Y.shifted(k) * stack;
        integrand[k] = uchi.adjoint() * f.W(basis.Y.grid.t(k)) * uchi;
    }
    Matrix lhs = nabla_integrate_samples(basis.Y.grid, integrand);
    double im = basis.lambda().imag();
    Matrix rhs = (im > 0 ? 1.0 : -1.0) * imag_part_matrix(M) / std::abs(im);
    return max_eig_herm(lhs - rhs);
}

// Limit of the Weyl disks along an increasing b-list: eigenvalue tracks of
// F22(b, lambda), the rank r(lambda) of the limiting radius, and the
// extrapolated center/radius.
struct LimitReport {
    Matrix C0, R0;
    int rank = 0;
    std::vector<double> b_list;
    std::vector<std::vector<double>> mu;  // mu[b_index][j], ascending in j
    std::vector<double> gamma;            // finite limits, one per finite track
    std::vector<bool> finite_track;       // per track j
};

inline LimitReport limit_disk(const CoefficientField& f, const TimeScale& ts,
                              const BoundaryPair& bp, cxd lambda,
                              const std::vector<double>& b_list,
                              const SpectrumOptions& opt = {}) {
    if (lambda.imag() == 0.0) throw ValidationError("limit_disk: Im lambda must be nonzero");
    if (b_list.size() < 3) throw ValidationError("limit_disk: b_list needs at least 3 entries");
    for (std::size_t i = 0; i + 1 < b_list.size(); ++i)
        if (!(b_list[i] < b_list[i + 1]))
            throw ValidationError("limit_disk: b_list must be strictly increasing");

    const int d = bp.d;
    std::vector<WeylData> per_b(b_list.size());
    parallel_for(b_list.size(), opt.parallel, [&](std::size_t i) {
        per_b[i] = weyl_F_endpoint(f, bp, lambda, ts, b_list[i], opt);
    });

    LimitReport rep;
    rep.b_list = b_list;
    rep.mu.resize(b_list.size());
    for (std::size_t i = 0; i < b_list.size(); ++i) {
        Eigen::VectorXd ev = herm_eigenvalues(per_b[i].F22);
        rep.mu[i].assign(ev.data(), ev.data() + ev.size());
        if (min_eig_herm(per_b[i].F22) <= 0)
            throw NumericalError("limit_disk: F22 not positive definite at b = " +
                                 detail::fmt(b_list[i]) + " (below the definiteness onset t1?)");
    }
    // F22 is Loewner non-decreasing in b, so each sorted track must ascend.
    for (std::size_t i = 0; i + 1 < b_list.size(); ++i)
        for (int j = 0; j < d; ++j)
            if (rep.mu[i + 1][static_cast<std::size_t>(j)] <
                rep.mu[i][static_cast<std::size_t>(j)] - 1e-10 * rep.mu[i][static_cast<std::size_t>(j)])
                throw NumericalError("limit_disk: non-monotone eigenvalue track " +
                                     std::to_string(j) + " between b = " +
                                     detail::fmt(b_list[i]) + " and " +
                                     detail::fmt(b_list[i + 1]));

    // Final-doubling dichotomy: a track is finite when it grew by < 1.05 over
    // the last doubling of b, divergent when it grew by at least 2x per
    // doubling; anything in between is inconclusive.
    double b_last = b_list.back();
    std::size_t mid = 0;
    for (std::size_t i = 0; i + 1 < b_list.size(); ++i)
        if (std::abs(b_list[i] - b_last / 2.0) < std::abs(b_list[mid] - b_last / 2.0)) mid = i;
    double span = b_last / b_list[mid];
    if (span < 1.2)
        throw InconclusiveError(
            "limit_disk: b_list tail (b_last/b_mid = " + detail::fmt(span) +
            ") is too short to discriminate converged from divergent tracks");
    double log2span = std::log2(span);
    double thr_finite = std::pow(1.05, log2span);
    double thr_divergent = span;  // 2x per doubling

    rep.finite_track.assign(static_cast<std::size_t>(d), false);
    for (int j = 0; j < d; ++j) {
        double ratio = rep.mu.back()[static_cast<std::size_t>(j)] /
                       rep.mu[mid][static_cast<std::size_t>(j)];
        if (ratio < thr_finite) {
            rep.finite_track[static_cast<std::size_t>(j)] = true;
        } else if (ratio < thr_divergent) {
            throw InconclusiveError(
                "limit_disk: eigenvalue track " + std::to_string(j) + " grew by " +
                detail::fmt(ratio) + " over the final doubling: neither converged (< " +
                detail::fmt(thr_finite) + ") nor clearly divergent (>= " +
                detail::fmt(thr_divergent) + "); extend b_list");
        }
    }
    for (int j = 0; j < d; ++j)
        if (rep.finite_track[static_cast<std::size_t>(j)]) {
            ++rep.rank;
            rep.gamma.push_back(rep.mu.back()[static_cast<std::size_t>(j)]);
        }

    const WeylData& last = per_b.back();
    rep.C0 = -last.F22.fullPivLu().solve(last.F12.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(last.F22));
    Eigen::VectorXd inv_sqrt(d);
    for (int j = 0; j < d; ++j)
        inv_sqrt(j) = rep.finite_track[static_cast<std::size_t>(j)]
                          ? 1.0 / std::sqrt(es.eigenvalues()(j))
                          : 0.0;
    rep.R0 = es.eigenvectors() * inv_sqrt.asDiagonal().toDenseMatrix().cast<cxd>() *
             es.eigenvectors().adjoint();
    return rep;
}

// Square-summable solution count d + r(lambda), with an independent
// truncated-norm plateau count.  The rotated basis [chi, phi V] is tracked
// over the b-list: chi = Y (I; C0) realizes the d solutions attached to the
// limiting disk, and V rotates phi onto the eigen-directions of F22(b_last).
// Only the phi-directions enter the direct count: chi columns are square
// summable by the limiting-set theory, but forward propagation contaminates
// them with growing-mode noise under exponential dichotomy, so their plateau
// is not a reliable numerical signal.  Their norm tracks stay in the
// diagnostics.  A phi-direction counts once its truncated norm grows by less
// than 1e-6 (relatively) over the last b-interval; the integral route here is
// independent of the endpoint route inside limit_disk.
struct SquareSummableCount {
    int count = 0;         // d + r(lambda)
    int direct_count = 0;  // d + plateaued phi-directions
    bool consistent = true;
    std::vector<std::vector<double>> norms;  // norms[column][b_index]
};

inline SquareSummableCount count_square_summable_detail(
    const CoefficientField& f, const TimeScale& ts, const BoundaryPair& bp, cxd lambda,
    const std::vector<double>& b_list, const SpectrumOptions& opt = {},
    const LimitReport* precomputed = nullptr) {
    LimitReport rep =
        precomputed ? *precomputed : limit_disk(f, ts, bp, lambda, b_list, opt);
    const int d = bp.d;
    SquareSummableCount out;
    out.count = d + rep.rank;

    // Basis columns: [chi, phi V] = Y * [[I, 0], [C0, V]], V the unitary
    // eigenbasis of F22(b_last).
    WeylData last = weyl_F_endpoint(f, bp, lambda, ts, b_list.back(), opt);
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(last.F22));
    Matrix T = Matrix::Zero(2 * d, 2 * d);
    T.topLeftCorner(d, d) = Matrix::Identity(d, d);
    T.bottomLeftCorner(d, d) = rep.C0;
    T.bottomRightCorner(d, d) = es.eigenvectors();
    out.norms.assign(static_cast<std::size_t>(2 * d), std::vector<double>(b_list.size(), 0.0));
    std::vector<Matrix> kb(b_list.size());
    parallel_for(b_list.size(), opt.parallel, [&](std::size_t i) {
        Grid g = detail::problem_grid(ts, b_list[i], opt);
        Trajectory tr = propagate_fundamental(f, lambda, weyl_omega(bp.alpha), g, opt.prop);
        std::vector<Matrix> integrand(tr.samples.size());
        for (std::size_t k = 0; k < tr.samples.size(); ++k) {
            Matrix uy = tr.shifted(k);
            integrand[k] = uy.adjoint() * f.W(g.t(k)) * uy;
        }
        kb[i] = nabla_integrate_samples(g, integrand);
    });
    for (std::size_t i = 0; i < b_list.size(); ++i) {
        Matrix n = T.adjoint() * kb[i] * T;
        for (int c = 0; c < 2 * d; ++c)
            out.norms[static_cast<std::size_t>(c)][i] = n(c, c).real();
    }
    out.direct_count = d;
    for (int c = d; c < 2 * d; ++c) {
        const auto& track = out.norms[static_cast<std::size_t>(c)];
        double inc = track[b_list.size() - 1] - track[b_list.size() - 2];
        double rel = inc / std::max(track.back(), 1e-300);
        if (rel < 1e-6) ++out.direct_count;
    }
    out.consistent = (out.direct_count == out.count);
    return out;
}

inline int count_square_summable(const CoefficientField& f, const TimeScale& ts,
                                 const BoundaryPair& bp, cxd lambda,
                                 const std::vector<double>& b_list,
                                 const SpectrumOptions& opt = {}) {
    return count_square_summable_detail(f, ts, bp, lambda, b_list, opt).count;
}

enum class SpectrumClass { limit_point, limit_circle, intermediate };

inline const char* to_string(SpectrumClass c) {
    switch (c) {
        case SpectrumClass::limit_point: return "limit_point";
        case SpectrumClass::limit_circle: return "limit_circle";
        case SpectrumClass::intermediate: return "intermediate";
    }
    return "?";
}

// Numerical endpoint classification: defect indices d+- = d + r(lambda+-),
// limit point iff d+ = d- = d, limit circle iff d+ = d- = 2d.  Reported as a
// numerical inference with the b-list tail diagnostics attached.
struct ClassificationReport {
    int d = 0;
    int r_plus = 0, r_minus = 0;
    int d_plus = 0, d_minus = 0;
    SpectrumClass label = SpectrumClass::intermediate;
    SquareSummableCount count_plus, count_minus;
    bool counts_consistent = true;
    bool largest_defect_checked = false;
    bool largest_defect_ok = true;
    cxd largest_defect_probe;
    bool real_coefficients = false;
    bool real_symmetry_ok = true;
    LimitReport limit_plus, limit_minus;
};

inline ClassificationReport classify(const CoefficientField& f, const TimeScale& ts,
                                     const BoundaryPair& bp, cxd lambda_plus, cxd lambda_minus,
                                     const std::vector<double>& b_list,
                                     const SpectrumOptions& opt = {}) {
    if (!(lambda_plus.imag() > 0))
        throw ValidationError("classify: lambda_plus must have positive imaginary part");
    if (!(lambda_minus.imag() < 0))
        throw ValidationError("classify: lambda_minus must have negative imaginary part");

    ClassificationReport rep;
    rep.d = bp.d;
    rep.limit_plus = limit_disk(f, ts, bp, lambda_plus, b_list, opt);
    rep.limit_minus = limit_disk(f, ts, bp, lambda_minus, b_list, opt);
    rep.r_plus = rep.limit_plus.rank;
    rep.r_minus = rep.limit_minus.rank;
    rep.d_plus = bp.d + rep.r_plus;
    rep.d_minus = bp.d + rep.r_minus;
    if (rep.d_plus == bp.d && rep.d_minus == bp.d) rep.label = SpectrumClass::limit_point;
    else if (rep.d_plus == 2 * bp.d && rep.d_minus == 2 * bp.d)
        rep.label = SpectrumClass::limit_circle;
    else rep.label = SpectrumClass::intermediate;

    rep.count_plus = count_square_summable_detail(f, ts, bp, lambda_plus, b_list, opt,
                                                  &rep.limit_plus);
    rep.count_minus = count_square_summable_detail(f, ts, bp, lambda_minus, b_list, opt,
                                                   &rep.limit_minus);
    rep.counts_consistent = rep.count_plus.consistent && rep.count_minus.consistent;

    // When every solution is square summable at lambda+, the largest defect
    // index property predicts the same at any other lambda; probe one.
    if (rep.d_plus == 2 * bp.d) {
        rep.largest_defect_checked = true;
        rep.largest_defect_probe = lambda_plus + cxd(1.0, 0.0);
        SquareSummableCount second = count_square_summable_detail(
            f, ts, bp, rep.largest_defect_probe, b_list, opt);
        rep.largest_defect_ok = (second.count == 2 * bp.d);
    }

    rep.real_coefficients = f.real_coefficients;
    if (f.real_coefficients) rep.real_symmetry_ok = (rep.d_plus == rep.d_minus);
    return rep;
}

}  // namespace hamts
