#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "hamts/parallel.hpp"
#include "hamts/propagate.hpp"

namespace hamts {

// Separated self-adjoint boundary data: alpha at rho(t0), beta at b, each
// d x 2d with alpha alpha* = I and alpha J alpha* = 0, plus the encoding
// matrices M = (-J alpha*, 0), N = (0, J beta*).
struct BoundaryPair {
    int d = 0;
    Matrix alpha, beta;  // d x 2d
    Matrix M, N;         // 2d x 2d
};

inline BoundaryPair validate_boundary(const Matrix& alpha, const Matrix& beta,
                                      double tol = 1e-10) {
    const auto d = alpha.rows();
    if (alpha.cols() != 2 * d || beta.rows() != d || beta.cols() != 2 * d)
        throw ValidationError("boundary: alpha and beta must be d x 2d of equal d");
    Matrix J = symplectic_J(static_cast<int>(d));
    auto check = [&](const Matrix& m, const char* name) {
        Matrix gram = m * m.adjoint();
        if ((gram - Matrix::Identity(d, d)).norm() > tol)
            throw ValidationError(std::string(name) + ": normalization failed, " + name + "*" +
                                  name + "^* differs from I by " +
                                  std::to_string((gram - Matrix::Identity(d, d)).norm()));
        if ((m * J * m.adjoint()).norm() > tol)
            throw ValidationError(std::string(name) + ": isotropy failed, " + name + " J " +
                                  name + "^* has norm " +
                                  std::to_string((m * J * m.adjoint()).norm()));
        Eigen::JacobiSVD<Matrix> svd(m);
        if (svd.singularValues().minCoeff() < 0.5)
            throw ValidationError(std::string(name) + ": rank deficient");
    };
    check(alpha, "alpha");
    check(beta, "beta");

    BoundaryPair bp;
    bp.d = static_cast<int>(d);
    bp.alpha = alpha;
    bp.beta = beta;
    bp.M = Matrix::Zero(2 * d, 2 * d);
    bp.M.leftCols(d) = -J * alpha.adjoint();
    bp.N = Matrix::Zero(2 * d, 2 * d);
    bp.N.rightCols(d) = J * beta.adjoint();
    if ((bp.M.adjoint() * J * bp.M).norm() > tol || (bp.N.adjoint() * J * bp.N).norm() > tol)
        throw ValidationError("boundary: M*JM = 0 = N*JN failed");
    Matrix stacked(4 * d, 2 * d);
    stacked.topRows(2 * d) = bp.M;
    stacked.bottomRows(2 * d) = bp.N;
    Eigen::JacobiSVD<Matrix> svd(stacked);
    if (svd.singularValues().minCoeff() < tol)
        throw ValidationError("boundary: stacked (M; N) is rank deficient");
    return bp;
}

struct SpectrumOptions {
    double h = 0.0;  // dense refinement; 0 = (stretch length)/1024
    PropagateOptions prop;
    int scan_points = 2001;
    int parallel = 1;
    double merge_tol = 1e-8;       // clustered roots closer than this merge
    double sv_rel_tol = 1e-8;      // null-space threshold relative to sigma_max
    double min_prominence = 1e-3;  // scan minima below this * median are polished
};

namespace detail {

inline double default_cell_h(const TimeScale& ts) {
    double h = 0.0;
    for (const auto& c : ts.cells())
        if (const auto* iv = std::get_if<Interval>(&c))
            h = std::max(h, (iv->hi - iv->lo) / 1024.0);
    return h > 0 ? h : 1.0;
}

inline Grid problem_grid(const TimeScale& ts, double b, const SpectrumOptions& opt) {
    double h = opt.h > 0 ? opt.h : default_cell_h(ts);
    return make_grid(ts, ts.jumps(ts.t0()).rho, b, h);
}

}  // namespace detail

// Characteristic determinant det(Phi(b, lambda) M - N) with Phi(rho(t0)) = I.
inline cxd char_det(const CoefficientField& f, const TimeScale& ts, const BoundaryPair& bp,
                    double b, cxd lambda, const SpectrumOptions& opt = {}) {
    Grid g = detail::problem_grid(ts, b, opt);
    Matrix Phib = propagate_endpoint(f, lambda, Matrix::Identity(2 * bp.d, 2 * bp.d), g,
                                     opt.prop);
    return (Phib * bp.M - bp.N).determinant();
}

// Gram matrix K(t, lambda) = int_(rho(t0), t] (U Phi)* W (U Phi) nabla tau.
inline Matrix gram_K(const CoefficientField& f, const Trajectory& tr, std::size_t from = 0) {
    std::vector<Matrix> integrand(tr.samples.size());
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
        Matrix up = tr.shifted(k);
        integrand[k] = up.adjoint() * f.W(tr.grid.t(k)) * up;
    }
    return nabla_integrate_samples(tr.grid, integrand, from);
}

inline Matrix gram_K(const CoefficientField& f, const TimeScale& ts, cxd lambda, double t,
                     const SpectrumOptions& opt = {}) {
    Grid g = detail::problem_grid(ts, t, opt);
    Trajectory tr =
        propagate_fundamental(f, lambda, Matrix::Identity(2 * f.d, 2 * f.d), g, opt.prop);
    return gram_K(f, tr);
}

// Weighted inner product <y, z>_b = int_(rho(t0), b] (Uz)* W (Uy) nabla t of
// sampled paths sharing a grid.
inline cxd weighted_inner_product(const CoefficientField& f, const SampledPath& y,
                                  const SampledPath& z) {
    detail::check_matching_grids(y.grid, z.grid, "weighted_inner_product");
    SampledPath uy = apply_shift(y, ShiftDir::left);
    SampledPath uz = apply_shift(z, ShiftDir::left);
    std::vector<cxd> integrand(y.grid.size());
    for (std::size_t k = 0; k < y.grid.size(); ++k)
        integrand[k] =
            (uz.values[k].adjoint() * f.W(y.grid.t(k)) * uy.values[k]).value();
    return nabla_integrate_samples(y.grid, integrand);
}

// Smallest candidate t1 with int_(t0, t] (U Phi)* W (U Phi) positive definite
// for every candidate t >= t1.  Candidates default to 16 points spread over
// (t0, horizon], snapped to the scale.  The positivity threshold is
// 1e-12 * integral of trace W (scale invariant).
inline double definiteness_onset(const CoefficientField& f, const TimeScale& ts, cxd lambda,
                                 std::vector<double> candidates = {},
                                 const SpectrumOptions& opt = {}) {
    if (candidates.empty()) {
        for (int j = 1; j <= 16; ++j)
            candidates.push_back(ts.nearest(ts.t0() + (ts.horizon() - ts.t0()) * j / 16.0));
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        candidates.erase(
            std::remove_if(candidates.begin(), candidates.end(),
                           [&](double c) { return c <= ts.t0(); }),
            candidates.end());
    }
    std::sort(candidates.begin(), candidates.end());
    if (candidates.empty())
        throw ValidationError("definiteness_onset: no candidates beyond t0");

    Grid full = detail::problem_grid(ts, ts.horizon(), opt);
    double trace_w = std::abs(
        nabla_integrate(full, [&](double t) { return f.W(t).trace(); }));
    double tol = 1e-12 * std::max(trace_w, 1e-300);

    std::vector<double> me(candidates.size());
    parallel_for(candidates.size(), opt.parallel, [&](std::size_t i) {
        Grid g = detail::problem_grid(ts, candidates[i], opt);
        Trajectory tr = propagate_fundamental(f, lambda,
                                              Matrix::Identity(2 * f.d, 2 * f.d), g, opt.prop);
        Matrix K = gram_K(f, tr, g.index_of(ts.t0()));
        me[i] = min_eig_herm(K);
    });
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (me[i] > tol) {
            for (std::size_t j = i + 1; j < candidates.size(); ++j)
                if (me[j] <= tol)
                    throw NumericalError(
                        "definiteness_onset: positivity not monotone across candidates");
            return candidates[i];
        }
    }
    throw NumericalError("definiteness_onset: definiteness not attained by the horizon");
}

// One eigenvalue with its K-orthonormalized eigenvector data.
struct EigenGroup {
    double lambda = 0;
    int multiplicity = 0;
    std::vector<Vector> xi;  // null vectors of Phi(b)M - N, 2d each
    std::vector<Vector> u;   // initial values M xi after orthonormalization
};

struct EigenList {
    std::vector<EigenGroup> groups;

    std::vector<double> expanded() const {
        std::vector<double> out;
        for (const auto& g : groups)
            for (int i = 0; i < g.multiplicity; ++i) out.push_back(g.lambda);
        return out;
    }
    int total_multiplicity() const {
        int n = 0;
        for (const auto& g : groups) n += g.multiplicity;
        return n;
    }
};

namespace detail {

// Secant iteration restricted to the real axis, acting on the complex-valued
// characteristic determinant.  Returns the best iterate, or nothing when the
// iteration escapes the scan window.
template <class Fn>
inline std::optional<double> polish_root(Fn&& fval, double l0, double l1, double span,
                                         double lo, double hi) {
    cxd f0 = fval(l0), f1 = fval(l1);
    double best = std::abs(f1) < std::abs(f0) ? l1 : l0;
    double best_abs = std::min(std::abs(f0), std::abs(f1));
    for (int it = 0; it < 60; ++it) {
        cxd denom = f1 - f0;
        if (std::abs(denom) == 0.0) break;
        double step = ((f1 * (l1 - l0)) / denom).real();
        double l2 = l1 - step;
        if (l2 < lo - 2 * span || l2 > hi + 2 * span) return std::nullopt;
        cxd f2 = fval(l2);
        l0 = l1; f0 = f1; l1 = l2; f1 = f2;
        if (std::abs(f2) < best_abs) { best_abs = std::abs(f2); best = l2; }
        if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(l1))) break;
    }
    return best;
}

}  // namespace detail

// Real eigenvalues of the regular problem on [rho(t0), b]: scan of
// |det(Phi(b, .)M - N)| over [lambda_lo, lambda_hi], local minima polished by
// a real-axis secant, roots verified by the null space of Phi(b)M - N, and
// eigenvectors orthonormalized in the K(b, lambda) inner product.
inline EigenList find_eigenvalues(const CoefficientField& f, const TimeScale& ts,
                                  const BoundaryPair& bp, double b, double lambda_lo,
                                  double lambda_hi, int max_count,
                                  const SpectrumOptions& opt = {}) {
    EigenList out;
    if (!(lambda_lo < lambda_hi) || max_count <= 0) return out;

    Grid g = detail::problem_grid(ts, b, opt);
    const Matrix I2d = Matrix::Identity(2 * bp.d, 2 * bp.d);
    auto det_at = [&](double l) {
        Matrix Phib = propagate_endpoint(f, cxd(l, 0.0), I2d, g, opt.prop);
        return (Phib * bp.M - bp.N).determinant();
    };

    const int n = std::max(opt.scan_points, 16);
    std::vector<double> lam(static_cast<std::size_t>(n)), mag(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), opt.parallel, [&](std::size_t i) {
        lam[i] = lambda_lo + (lambda_hi - lambda_lo) * static_cast<double>(i) / (n - 1);
        mag[i] = std::abs(det_at(lam[i]));
    });
    std::vector<double> sorted_mag = mag;
    std::sort(sorted_mag.begin(), sorted_mag.end());
    double median = std::max(sorted_mag[sorted_mag.size() / 2], 1e-300);
    double span = (lambda_hi - lambda_lo) / (n - 1);

    // Every below-median local minimum is polished; the determinant need not
    // be real off the spectrum, so sign-change bisection is unreliable.  A
    // polished candidate must come within `min_prominence` of a true zero
    // (relative to the scan median) to survive; the null-space check below
    // then fixes its multiplicity.  Candidates already far below the median
    // that fail to polish indicate an under-resolved scan.
    std::vector<double> roots;
    for (int i = 1; i + 1 < n; ++i) {
        if (mag[i] > median) continue;
        if (!(mag[i] <= mag[i - 1] && mag[i] <= mag[i + 1])) continue;
        auto polished =
            detail::polish_root(det_at, lam[i - 1], lam[i + 1], span, lambda_lo, lambda_hi);
        bool near_root = polished && std::abs(det_at(*polished)) <=
                                         opt.min_prominence * std::max(mag[i], median * 1e-9);
        if (!near_root) {
            if (mag[i] < opt.min_prominence * median)
                throw NumericalError("eigenvalue polish diverged near lambda = " +
                                     detail::fmt(lam[i]) + "; scan resolution too coarse");
            continue;  // shallow minimum away from the spectrum
        }
        roots.push_back(*polished);
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [&](double a, double c) { return std::abs(a - c) < opt.merge_tol; }),
                roots.end());

    for (double r : roots) {
        Trajectory tr = propagate_fundamental(f, cxd(r, 0.0), I2d, g, opt.prop);
        Matrix D = tr.samples.back() * bp.M - bp.N;
        Eigen::JacobiSVD<Matrix> svd(D, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        double smax = sv(0);
        int mult = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) <= opt.sv_rel_tol * smax) ++mult;
        if (mult == 0) continue;  // spurious scan minimum

        EigenGroup grp;
        grp.lambda = r;
        grp.multiplicity = mult;
        Matrix Xi = svd.matrixV().rightCols(mult);
        // K-orthonormalization within the eigenspace: with U = M Xi and
        // G = U* K U = L L*, the columns of Xi L^{-*} give <y_r, y_s>_b = I.
        Matrix K = gram_K(f, tr);
        Matrix U = bp.M * Xi;
        Matrix G = U.adjoint() * K * U;
        Eigen::LLT<Matrix> llt(hermitian_part(G));
        if (llt.info() != Eigen::Success)
            throw NumericalError("eigenfunction Gram matrix not positive definite at lambda = " +
                                 detail::fmt(r) + " (b below the definiteness onset t1?)");
        Matrix Lc = llt.matrixL();
        Matrix T = Lc.adjoint().fullPivLu().solve(Matrix::Identity(mult, mult));
        Xi = Xi * T;
        U = U * T;
        for (int c = 0; c < mult; ++c) {
            grp.xi.push_back(Xi.col(c));
            grp.u.push_back(U.col(c));
        }
        out.groups.push_back(std::move(grp));
    }

    if (out.groups.empty())
        throw NumericalError("no eigenvalues found in [" + detail::fmt(lambda_lo) + ", " +
                             detail::fmt(lambda_hi) + "]");

    // order by |lambda|, ties negative first
    std::sort(out.groups.begin(), out.groups.end(), [](const EigenGroup& a, const EigenGroup& b) {
        if (std::abs(a.lambda) != std::abs(b.lambda))
            return std::abs(a.lambda) < std::abs(b.lambda);
        return a.lambda < b.lambda;
    });
    while (out.total_multiplicity() > max_count) {
        auto& last = out.groups.back();
        int excess = out.total_multiplicity() - max_count;
        if (last.multiplicity <= excess) {
            out.groups.pop_back();
        } else {
            last.multiplicity -= excess;
            last.xi.resize(static_cast<std::size_t>(last.multiplicity));
            last.u.resize(static_cast<std::size_t>(last.multiplicity));
        }
    }
    return out;
}

// Sampled eigenfunction y(t) = Phi(t, lambda) u over the problem grid.
inline SampledPath eigenfunction_path(const CoefficientField& f, const TimeScale& ts,
                                      double b, double lambda, const Vector& u,
                                      const SpectrumOptions& opt = {}) {
    Grid g = detail::problem_grid(ts, b, opt);
    Trajectory tr =
        propagate_fundamental(f, cxd(lambda, 0.0), Matrix::Identity(2 * f.d, 2 * f.d), g,
                              opt.prop);
    return path_from_trajectory(tr, u);
}

}  // namespace hamts
