#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

using namespace hamts;

TEST_CASE("free continuous field validates", "[coefficients]") {
    TimeScale ts = oracles::continuous_scale(0, 10, 0);
    CoefficientField f = oracles::scalar_field(ts);
    CHECK(f.d == 1);
    CHECK(f.real_coefficients);
    Matrix P = f.P(1.0);
    CHECK(P(0, 0) == cxd(0, 0));
    CHECK(P(1, 1) == cxd(1, 0));
    Matrix W = f.W(1.0);
    CHECK(W(0, 0) == cxd(1, 0));
    CHECK(W(1, 1) == cxd(0, 0));
}

TEST_CASE("indefinite weight is rejected", "[coefficients]") {
    TimeScale ts = oracles::continuous_scale(0, 10, 0);
    Grid g = oracles::sample_grid(ts);
    CHECK_THROWS_AS(build_coefficients(1, {"0"}, {"1"}, {"0"}, {"-1"}, {"0"}, g),
                    ValidationError);
}

TEST_CASE("non-Hermitian block is rejected, not repaired", "[coefficients]") {
    TimeScale ts = oracles::continuous_scale(0, 10, 0);
    Grid g = oracles::sample_grid(ts);
    CHECK_THROWS_AS(build_coefficients(1, {"0"}, {"i"}, {"0"}, {"1"}, {"0"}, g),
                    ValidationError);
    // complex entries in A are permitted
    CHECK_NOTHROW(build_coefficients(1, {"i*t"}, {"1"}, {"0"}, {"1"}, {"0"}, g));
}

TEST_CASE("singular I - nu A on the integer lattice is rejected", "[coefficients]") {
    TimeScale ts = oracles::integer_scale(-1, 10, 0);
    Grid g = make_grid(ts, -1, 10, 1.0);
    CHECK_THROWS_AS(build_coefficients(1, {"1"}, {"1"}, {"0"}, {"1"}, {"0"}, g),
                    ValidationError);
    CHECK_NOTHROW(build_coefficients(1, {"0.5"}, {"1"}, {"0"}, {"1"}, {"0"}, g));
}

TEST_CASE("Hermiticity and positivity hold at every grid point", "[coefficients]") {
    TimeScale ts = oracles::continuous_scale(0, 5, 0);
    Grid g = oracles::sample_grid(ts);
    CoefficientField f =
        build_coefficients(2, {"0", "t", "0", "0"}, {"1", "i*t", "-i*t", "2"},
                           {"cos(t)", "0", "0", "1"}, {"1", "0", "0", "exp(-t)"},
                           {"0", "0", "0", "0"}, g);
    CHECK_FALSE(f.real_coefficients);
    for (const auto& gp : g.points) {
        CHECK(herm_residual(f.B(gp.t)) <= 1e-10);
        CHECK(herm_residual(f.C(gp.t)) <= 1e-10);
        CHECK(herm_residual(f.W1(gp.t)) <= 1e-10);
        CHECK(min_eig_herm(f.W1(gp.t)) >= -1e-10);
        CHECK(min_eig_herm(f.W2(gp.t)) >= -1e-10);
    }
}

TEST_CASE("Sturm-Liouville reduction, n = 1", "[coefficients]") {
    TimeScale ts = oracles::continuous_scale(0, 5, 0);
    Grid g = oracles::sample_grid(ts);
    CoefficientField f = from_sturm_liouville(1, std::vector<std::string>{"2+cos(t)", "1"}, ts, g);
    CHECK(f.d == 1);
    CHECK(f.A(1.0)(0, 0) == cxd(0, 0));
    CHECK(f.B(1.0)(0, 0) == cxd(1, 0));
    CHECK(std::abs(f.C(1.5)(0, 0) - cxd(2 + std::cos(1.5), 0)) < 1e-15);
    CHECK(f.W1(1.0)(0, 0) == cxd(1, 0));
}

TEST_CASE("Sturm-Liouville reduction, n = 2 block layout", "[coefficients]") {
    TimeScale ts = oracles::integer_scale(-1, 6, 0);
    Grid g = make_grid(ts, -1, 6, 1.0);
    CoefficientField f = from_sturm_liouville(2, std::vector<std::string>{"t", "1+t", "2"}, ts, g);
    CHECK(f.d == 2);
    Matrix A = f.A(3.0);
    CHECK(A(0, 1) == cxd(1, 0));
    CHECK(A(1, 0) == cxd(0, 0));
    CHECK(A(0, 0) == cxd(0, 0));
    // B = diag{0, 1/p2(rho(t))}, C = diag{p0(t), p1(rho(t))}; on Z rho(3) = 2
    Matrix B = f.B(3.0);
    CHECK(B(0, 0) == cxd(0, 0));
    CHECK(std::abs(B(1, 1) - cxd(0.5, 0)) < 1e-15);
    Matrix C = f.C(3.0);
    CHECK(std::abs(C(0, 0) - cxd(3.0, 0)) < 1e-15);
    CHECK(std::abs(C(1, 1) - cxd(3.0, 0)) < 1e-15);  // p1(rho(3)) = 1 + 2
    // on a dense scale p^rho = p
    TimeScale tc = oracles::continuous_scale(0, 5, 0);
    Grid gc = oracles::sample_grid(tc);
    CoefficientField fc = from_sturm_liouville(2, std::vector<std::string>{"t", "1+t", "2"}, tc, gc);
    CHECK(std::abs(fc.C(1.5)(1, 1) - cxd(2.5, 0)) < 1e-15);
}

TEST_CASE("vanishing leading coefficient is rejected", "[coefficients]") {
    TimeScale ts = oracles::continuous_scale(0, 1, 0);
    Grid g = oracles::sample_grid(ts);
    CHECK_THROWS_AS(from_sturm_liouville(1, std::vector<std::string>{"1", "t"}, ts, g), ValidationError);
}
