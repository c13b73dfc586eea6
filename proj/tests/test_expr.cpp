#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pmaj/expr.hpp"
#include "pmaj/rng.hpp"

using namespace pmaj;
using Catch::Approx;

TEST_CASE("constants and known trig values") {
    CHECK(parse_coeff("1").eval(0.3) == 1.0);
    CHECK(parse_coeff("1").eval(-17.0) == 1.0);
    const CoeffFn c = parse_coeff("cos(pi*x)");
    CHECK(c.eval(0.0) == Approx(1.0));
    CHECK(c.eval(1.0) == Approx(-1.0));
    CHECK(parse_coeff("min(0, 8*x*(1-x)-1)").eval(0.5) == 0.0);
}

TEST_CASE("eval examples and domain errors") {
    CHECK(parse_coeff("x^2").eval(3.0) == Approx(9.0));
    CHECK_THROWS_AS(parse_coeff("1/x").eval(0.0), DomainError);
    CHECK(parse_coeff("abs(0.5-x)^(1/3)").eval(0.5) == 0.0);
    CHECK_THROWS_AS(parse_coeff("sqrt(0-x)").eval(4.0), DomainError);
    CHECK_THROWS_AS(parse_coeff("(0-2)^0.5").eval(0.0), DomainError);
    CHECK(parse_coeff("(0-2)^3").eval(0.0) == Approx(-8.0));
    // the offending x is carried on the error
    try {
        parse_coeff("1/(x-2)").eval(2.0);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(e.x == 2.0);
    }
}

TEST_CASE("precedence and unary minus") {
    CHECK(parse_coeff("2+3*4").eval(0) == Approx(14.0));
    CHECK(parse_coeff("-x^2").eval(3.0) == Approx(-9.0));
    CHECK(parse_coeff("2^-1").eval(0) == Approx(0.5));
    CHECK(parse_coeff("2^3^2").eval(0) == Approx(512.0));  // right-associative
    CHECK(parse_coeff("2*-3").eval(0) == Approx(-6.0));
    CHECK(parse_coeff("6/3/2").eval(0) == Approx(1.0));
    CHECK(parse_coeff("max(1, min(2, x))").eval(5.0) == Approx(2.0));
}

TEST_CASE("syntax errors carry byte offsets") {
    try {
        parse_coeff("1+*2");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset == 2);
    }
    CHECK_THROWS_AS(parse_coeff(""), SyntaxError);
    CHECK_THROWS_AS(parse_coeff("(1+2"), SyntaxError);
    CHECK_THROWS_AS(parse_coeff("min(1)"), SyntaxError);
    CHECK_THROWS_AS(parse_coeff("1 2"), SyntaxError);
    try {
        parse_coeff("3*foo(x)");
        FAIL("expected UnknownIdentifier");
    } catch (const UnknownIdentifier& e) {
        CHECK(e.offset == 2);
    }
}

TEST_CASE("unparse round-trips on 1e3 sample points") {
    const char* exprs[] = {
        "1", "x", "pi", "x^2", "cos(pi*x)", "min(0, 8*x*(1-x)-1)",
        "abs(0.5-x)^2 + sqrt(abs(x))", "exp(-x^2)*sin(3*x)", "-x^3/(1+x^2)",
        "max(x, 1-x) - 2^-x",
    };
    for (const char* src : exprs) {
        const CoeffFn f = parse_coeff(src);
        const CoeffFn g = parse_coeff(f.unparse());
        for (int i = 0; i < 1000; ++i) {
            const double x = -2.0 + 4.0 * i / 999.0;
            double fv, gv;
            try {
                fv = f.eval(x);
            } catch (const DomainError&) {
                CHECK_THROWS_AS(g.eval(x), DomainError);
                continue;
            }
            gv = g.eval(x);
            CHECK(fv == gv);
        }
    }
}

TEST_CASE("polynomials agree with Horner evaluation") {
    // 3x^4 - 2.5x^3 + x^2 - 7x + 0.25
    const double coeffs[] = {3.0, -2.5, 1.0, -7.0, 0.25};
    const CoeffFn f = parse_coeff("3*x^4 - 2.5*x^3 + x^2 - 7*x + 0.25");
    for (int i = 0; i <= 200; ++i) {
        const double x = -3.0 + 6.0 * i / 200.0;
        double horner = 0.0;
        for (double c : coeffs) horner = horner * x + c;
        CHECK(f.eval(x) == Approx(horner).epsilon(1e-14).margin(1e-14));
    }
}

TEST_CASE("fuzzing with random token soup never crashes") {
    static const char* tokens[] = {"x",   "pi",  "1",  "2.5", "+",    "-",   "*",
                                   "/",   "^",   "(",  ")",   "sin",  "cos", "exp",
                                   "abs", "sqrt", "min", "max", ",",   "e",   "."};
    SplitMix64 rng(20240817);
    int parsed = 0, rejected = 0;
    for (int trial = 0; trial < 5000; ++trial) {
        std::string text;
        const int len = 1 + static_cast<int>(rng.next_below(12));
        for (int i = 0; i < len; ++i) {
            text += tokens[rng.next_below(std::size(tokens))];
            if (rng.next_below(3) == 0) text += ' ';
        }
        try {
            const CoeffFn f = parse_coeff(text);
            ++parsed;
            try {
                (void)f.eval(0.37);
            } catch (const DomainError&) {
            }
        } catch (const SyntaxError&) {
            ++rejected;
        } catch (const UnknownIdentifier&) {
            ++rejected;
        }
    }
    CHECK(parsed + rejected == 5000);
    CHECK(parsed > 0);
    CHECK(rejected > 0);
}
