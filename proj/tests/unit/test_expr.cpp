#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hamts/expr.hpp"

using namespace hamts;
using cd = std::complex<double>;

TEST_CASE("basic parses and evaluations", "[expr]") {
    CHECK(Expr::parse("2*t+1").eval(3.0) == cd(7.0, 0.0));
    CHECK(Expr::parse("exp(-t)").eval(0.0) == cd(1.0, 0.0));
    CHECK(Expr::parse("t^2").eval(3.0) == cd(9.0, 0.0));
    CHECK(std::abs(Expr::parse("sin(t)").eval(M_PI / 2) - cd(1, 0)) < 1e-15);
    CHECK(std::abs(Expr::parse("sqrt(t)").eval(9.0) - cd(3, 0)) < 1e-15);
    CHECK(Expr::parse("i*i").eval(0.0) == cd(-1.0, 0.0));
    CHECK(std::abs(Expr::parse("2^t").eval(0.5) - cd(std::sqrt(2.0), 0)) < 1e-15);
    CHECK(std::abs(Expr::parse("1e-3 + 2.5E2").eval(0.0) - cd(250.001, 0)) < 1e-12);
}

TEST_CASE("structure follows the grammar", "[expr]") {
    // precedence: 2*t+1 is (2*t)+1
    CHECK(Expr::parse("2*t+1").eval(5.0) == cd(11.0, 0.0));
    // right-associative power
    CHECK(Expr::parse("2^3^2").eval(0.0) == cd(512.0, 0.0));
    // unary minus binds to the atom
    CHECK(Expr::parse("-t^2").eval(3.0) == cd(9.0, 0.0));  // (-t)^2 per the grammar
    CHECK(Expr::parse("-(t^2)").eval(3.0) == cd(-9.0, 0.0));
    // division is left-associative
    CHECK(Expr::parse("8/4/2").eval(0.0) == cd(1.0, 0.0));
}

TEST_CASE("syntax errors carry the offset", "[expr]") {
    try {
        Expr::parse("sin(");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset == 4);
    }
    CHECK_THROWS_AS(Expr::parse("2*"), ParseError);
    CHECK_THROWS_AS(Expr::parse("foo(t)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("1 2"), ParseError);
    CHECK_THROWS_AS(Expr::parse(""), ParseError);
}

TEST_CASE("division by zero is reported", "[expr]") {
    Expr e = Expr::parse("1/t");
    CHECK_THROWS_AS(e.eval(0.0), NumericalError);
    CHECK(e.eval(2.0) == cd(0.5, 0.0));
}

TEST_CASE("principal branch for non-integer powers", "[expr]") {
    cd v = Expr::parse("(-1)^0.5").eval(0.0);
    CHECK(std::abs(v - cd(0, 1)) < 1e-12);
    cd w = Expr::parse("sqrt(-4)").eval(0.0);
    CHECK(std::abs(w - cd(0, 2)) < 1e-12);
}

namespace {

// random expression generator for the round-trip property
Expr random_expr(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 9);
    std::uniform_real_distribution<double> num(0.1, 4.0);
    switch (pick(rng)) {
        case 0: return Expr::parse("t");
        case 1: return Expr::constant(cd(num(rng), 0));
        case 2: return Expr::parse("i");
        default: break;
    }
    Expr a = random_expr(rng, depth - 1);
    Expr b = random_expr(rng, depth - 1);
    std::uniform_int_distribution<int> op(0, 6);
    switch (op(rng)) {
        case 0: return Expr::parse(a.str() + "+" + b.str());
        case 1: return Expr::parse(a.str() + "-" + b.str());
        case 2: return Expr::parse(a.str() + "*" + b.str());
        case 3: return Expr::parse("(" + a.str() + ")/(2+t*t)");
        case 4: return Expr::parse("sin(" + a.str() + ")");
        case 5: return Expr::parse("cos(" + b.str() + ")");
        default: return Expr::parse("exp(-(" + a.str() + "))");
    }
}

}  // namespace

TEST_CASE("print/parse round trip evaluates identically", "[expr]") {
    std::mt19937 rng(987654u);
    std::uniform_real_distribution<double> tval(-3.0, 3.0);
    for (int rep = 0; rep < 25; ++rep) {
        Expr e = random_expr(rng, 3);
        Expr back = Expr::parse(e.str());
        for (int k = 0; k < 100; ++k) {
            double t = tval(rng);
            cd v1 = e.eval(t), v2 = back.eval(t);
            REQUIRE(std::abs(v1 - v2) <= 1e-12 * (1.0 + std::abs(v1)));
        }
    }
}
