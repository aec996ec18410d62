#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/oracles.hpp"

using namespace hamts;

namespace {

Matrix rotation_phi(double t) {
    Matrix m(2, 2);
    m << cxd(std::cos(t), 0), cxd(std::sin(t), 0), cxd(-std::sin(t), 0), cxd(std::cos(t), 0);
    return m;
}

}  // namespace

TEST_CASE("integer free system at lambda 0 is exactly unipotent", "[propagate]") {
    TimeScale ts = oracles::integer_scale(-1, 12, 0);
    Grid g = make_grid(ts, -1, 12, 1.0);
    CoefficientField f = build_coefficients(1, {"0"}, {"1"}, {"0"}, {"1"}, {"0"}, g);
    Trajectory tr = propagate_fundamental(f, cxd(0, 0), Matrix::Identity(2, 2), g);
    // oracle: (I - S)^{-1} = [[1, 1], [0, 1]] applied k times
    Matrix step(2, 2);
    step << cxd(1, 0), cxd(1, 0), cxd(0, 0), cxd(1, 0);
    Matrix expect = Matrix::Identity(2, 2);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK((tr.samples[k] - expect).norm() <= 1e-12);
        expect = step * expect;
    }
}

TEST_CASE("continuous free system reproduces the rotation", "[propagate]") {
    TimeScale ts = oracles::continuous_scale(0, M_PI, 0);
    CoefficientField f = oracles::scalar_field(ts);
    Grid g = make_grid(ts, 0, M_PI, M_PI / 1024);
    Trajectory tr = propagate_fundamental(f, cxd(1, 0), Matrix::Identity(2, 2), g);
    for (std::size_t k = 0; k < g.size(); k += 64)
        CHECK((tr.samples[k] - rotation_phi(g.t(k))).norm() <= 1e-8);
    CHECK((tr.samples[g.index_of(g.b())] - rotation_phi(M_PI)).norm() <= 1e-8);
    Matrix half = propagate_endpoint(f, cxd(1, 0), Matrix::Identity(2, 2),
                                     make_grid(ts, 0, M_PI / 2, M_PI / 1024));
    Matrix want(2, 2);
    want << cxd(0, 0), cxd(1, 0), cxd(-1, 0), cxd(0, 0);
    CHECK((half - want).norm() <= 1e-8);
}

TEST_CASE("endpoint propagation matches the sampled one", "[propagate]") {
    TimeScale ts = oracles::continuous_scale(0, 4, 0);
    CoefficientField f = oracles::scalar_field(ts, "exp(-t)", "1-t/9");
    Grid g = make_grid(ts, 0, 4, 1.0 / 128);
    cxd lambda(0.4, 0.8);
    Trajectory tr = propagate_fundamental(f, lambda, Matrix::Identity(2, 2), g);
    Matrix endp = propagate_endpoint(f, lambda, Matrix::Identity(2, 2), g);
    CHECK((tr.samples.back() - endp).norm() <= 1e-9 * endp.norm());
}

TEST_CASE("nabla exponential examples", "[propagate]") {
    TimeScale tc = oracles::continuous_scale(0, 3, 1);
    cxd c(0.7, -0.2);
    cxd got = nabla_exponential([c](double) { return c; }, tc, 3.0);
    CHECK(std::abs(got - std::exp(c * 2.0)) < 1e-9);  // rho(t0) = t0 = 1 on a dense scale

    TimeScale tz = oracles::integer_scale(-1, 4, 0);
    cxd half = nabla_exponential([](double) { return cxd(0.5, 0); }, tz, 1.0);
    CHECK(std::abs(half - cxd(4.0, 0)) < 1e-13);  // two steps from rho(t0) = -1
    CHECK_THROWS_AS(nabla_exponential([](double) { return cxd(1.0, 0); }, tz, 2.0),
                    NumericalError);
}

TEST_CASE("symplectic constancy residuals", "[propagate]") {
    // continuous, lambda = 1 + i
    TimeScale tc = oracles::continuous_scale(0, M_PI, 0);
    CoefficientField fc = oracles::scalar_field(tc);
    Grid gc = make_grid(tc, 0, M_PI, M_PI / 512);
    cxd lam(1, 1);
    Matrix omega = weyl_omega(oracles::dirichlet_pair().alpha);
    Trajectory yl = propagate_fundamental(fc, lam, omega, gc);
    Trajectory yc = propagate_fundamental(fc, std::conj(lam), omega, gc);
    CHECK(symplectic_residual(yl, yc) <= 1e-7);

    // integer lattice: exact per-step algebra
    TimeScale tz = oracles::integer_scale(-1, 20, 0);
    Grid gz = make_grid(tz, -1, 20, 1.0);
    CoefficientField fz = build_coefficients(1, {"0"}, {"1"}, {"0"}, {"1"}, {"0"}, gz);
    Trajectory zl = propagate_fundamental(fz, lam, omega, gz);
    Trajectory zc = propagate_fundamental(fz, std::conj(lam), omega, gz);
    CHECK(symplectic_residual(zl, zc) <= 1e-12);

    // single point: zero exactly
    Grid g0 = make_grid(tz, -1, -1, 1.0);
    Trajectory one = propagate_fundamental(fz, lam, omega, g0);
    Trajectory onec = propagate_fundamental(fz, std::conj(lam), omega, g0);
    CHECK(symplectic_residual(one, onec) == 0.0);
}

TEST_CASE("per-step scattered symplecticity", "[propagate]") {
    PointSet geo;
    geo.pts = {1, 2, 4, 8, 16};
    TimeScale ts = TimeScale::build({geo}, 2.0, 16.0);
    Grid g = make_grid(ts, 1, 16, 1.0);
    CoefficientField f = build_coefficients(1, {"0.01"}, {"1"}, {"t/40"}, {"1"}, {"0"},
                                            oracles::sample_grid(ts, 1.0));
    cxd lam(0.3, 0.6);
    Trajectory yl = propagate_fundamental(f, lam, Matrix::Identity(2, 2), g);
    Trajectory yc = propagate_fundamental(f, std::conj(lam), Matrix::Identity(2, 2), g);
    Matrix J = f.J();
    for (std::size_t k = 1; k < g.size(); ++k) {
        Matrix before = yc.samples[k - 1].adjoint() * J * yl.samples[k - 1];
        Matrix after = yc.samples[k].adjoint() * J * yl.samples[k];
        CHECK((after - before).norm() <=
              1e-12 * std::max(1.0, yc.samples[k].norm() * yl.samples[k].norm()));
    }
}

TEST_CASE("dense steps show high-order convergence in the cap", "[propagate]") {
    TimeScale tc = oracles::continuous_scale(0, M_PI, 0);
    CoefficientField fc = oracles::scalar_field(tc);
    Matrix omega = weyl_omega(oracles::dirichlet_pair().alpha);
    cxd lam(1, 1);
    auto residual_with_cap = [&](double cap) {
        PropagateOptions opt;
        opt.rtol = 1e-2;  // loose: the step cap dominates
        opt.atol = 1e-4;
        opt.max_step = cap;
        Grid g = make_grid(tc, 0, M_PI, M_PI / 8);
        Trajectory yl = propagate_fundamental(fc, lam, omega, g, opt);
        Trajectory yc = propagate_fundamental(fc, std::conj(lam), omega, g, opt);
        return symplectic_residual(yl, yc);
    };
    double r1 = residual_with_cap(M_PI / 16);
    double r2 = residual_with_cap(M_PI / 32);
    CHECK(r2 <= r1 / 4.0);

    // and tightening rtol with free steps also reduces the drift
    auto residual_with_rtol = [&](double rtol) {
        PropagateOptions opt;
        opt.rtol = rtol;
        opt.atol = rtol * 1e-2;
        Grid g = make_grid(tc, 0, M_PI, M_PI / 8);
        Trajectory yl = propagate_fundamental(fc, lam, omega, g, opt);
        Trajectory yc = propagate_fundamental(fc, std::conj(lam), omega, g, opt);
        return symplectic_residual(yl, yc);
    };
    CHECK(residual_with_rtol(1e-10) <= residual_with_rtol(1e-6) / 4.0);
}

TEST_CASE("Liouville normalization residuals", "[propagate]") {
    // single point: exact
    TimeScale tz = oracles::integer_scale(-1, 20, 0);
    Grid g0 = make_grid(tz, -1, -1, 1.0);
    CoefficientField fz = build_coefficients(1, {"0"}, {"1"}, {"0"}, {"1"}, {"0"},
                                             make_grid(tz, -1, 20, 1.0));
    CHECK(liouville_residual(propagate_fundamental(fz, cxd(0, 1), Matrix::Identity(2, 2),
                                                   g0)) == 0.0);

    // integer lattice, lambda = i: short horizon keeps the determinant
    // cancellation well-conditioned
    Grid g5 = make_grid(tz, -1, 4, 1.0);
    CHECK(liouville_residual(propagate_fundamental(fz, cxd(0, 1), Matrix::Identity(2, 2),
                                                   g5)) <= 1e-9);

    // integer lattice, real lambda: 21 steps at 1e-10
    Grid g20 = make_grid(tz, -1, 20, 1.0);
    CHECK(liouville_residual(propagate_fundamental(fz, cxd(0.5, 0), Matrix::Identity(2, 2),
                                                   g20)) <= 1e-10);

    // continuous rotation at lambda = 1
    TimeScale tc = oracles::continuous_scale(0, M_PI, 0);
    CoefficientField fc = oracles::scalar_field(tc);
    Grid gc = make_grid(tc, 0, M_PI, M_PI / 512);
    CHECK(liouville_residual(propagate_fundamental(fc, cxd(1, 0), Matrix::Identity(2, 2),
                                                   gc)) <= 1e-7);

    // non-identity initial data is rejected
    CHECK_THROWS_AS(liouville_residual(propagate_fundamental(fc, cxd(1, 0),
                                                             2.0 * Matrix::Identity(2, 2), gc)),
                    ValidationError);
}

TEST_CASE("Lagrange identity telescopes exactly on the lattice", "[propagate]") {
    TimeScale tz = oracles::integer_scale(-1, 10, 0);
    Grid g = make_grid(tz, -1, 10, 1.0);
    CoefficientField f = build_coefficients(1, {"0"}, {"1"}, {"t/9"}, {"1"}, {"0"}, g);
    std::mt19937 rng(777u);
    for (int rep = 0; rep < 20; ++rep) {
        SampledPath x = oracles::poly_path(g, rng, 2, 2);
        SampledPath y = oracles::poly_path(g, rng, 2, 2);
        CHECK(lagrange_residual(x, y, f, g.a(), g.b()) <= 1e-9);
    }
}

TEST_CASE("Lagrange identity on a dense interval", "[propagate]") {
    TimeScale tc = oracles::continuous_scale(0, M_PI, 0);
    CoefficientField f = oracles::scalar_field(tc, "1", "cos(t)");
    Grid g = make_grid(tc, 0, M_PI, 1.0 / 512);
    std::mt19937 rng(778u);
    for (int rep = 0; rep < 5; ++rep) {
        SampledPath x = oracles::poly_path(g, rng, 3, 2);
        SampledPath y = oracles::poly_path(g, rng, 3, 2);
        CHECK(lagrange_residual(x, y, f, g.a(), g.b()) <= 1e-6);
    }
    SampledPath zero;
    zero.grid = g;
    for (std::size_t k = 0; k < g.size(); ++k) zero.values.push_back(Vector::Zero(2));
    SampledPath y = oracles::poly_path(g, rng, 3, 2);
    CHECK(lagrange_residual(zero, y, f, g.a(), g.b()) == 0.0);
}

TEST_CASE("solution pairs satisfy the weighted quadrature identity", "[propagate]") {
    // (eta - conj(lambda)) int (Uy)* W (Uz) = [y* J z]  for solutions
    TimeScale tc = oracles::continuous_scale(0, 3, 0);
    CoefficientField f = oracles::scalar_field(tc, "1+t/5", "sin(t)");
    Grid g = make_grid(tc, 0, 3, 1.0 / 256);
    cxd lambda(0.5, 0.7), eta(-0.3, 0.4);
    Trajectory tl = propagate_fundamental(f, lambda, Matrix::Identity(2, 2), g);
    Trajectory te = propagate_fundamental(f, eta, Matrix::Identity(2, 2), g);
    Vector c1(2), c2(2);
    c1 << cxd(1, 0.3), cxd(-0.2, 0.1);
    c2 << cxd(0.4, -1), cxd(0.8, 0.2);
    SampledPath y = path_from_trajectory(tl, c1);
    SampledPath z = path_from_trajectory(te, c2);
    SampledPath uy = apply_shift(y, ShiftDir::left);
    SampledPath uz = apply_shift(z, ShiftDir::left);
    std::vector<cxd> integrand(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        integrand[k] = (uy.values[k].adjoint() * f.W(g.t(k)) * uz.values[k]).value();
    cxd lhs = (eta - std::conj(lambda)) * nabla_integrate_samples(g, integrand);
    Matrix J = f.J();
    cxd rhs = (y.values.back().adjoint() * J * z.values.back()).value() -
              (y.values.front().adjoint() * J * z.values.front()).value();
    CHECK(std::abs(lhs - rhs) <= 1e-6);
}
