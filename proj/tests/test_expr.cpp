#include "doctest.h"

#include <cmath>

#include "actangle/catalog.hpp"
#include "actangle/error.hpp"
#include "actangle/expr.hpp"
#include "support.hpp"

using namespace actangle;
using namespace actangle::testing;

namespace {

double eval_at(const Expression& e, std::initializer_list<double> z) {
    const std::vector<double> v(z);
    return e.eval(v);
}

// Random well-formed source over n degrees of freedom.
std::string random_source(Gen& g, int n, int depth) {
    if (depth == 0 || g.integer(0, 3) == 0) {
        switch (g.integer(0, 3)) {
        case 0: return (g.coin() ? "q" : "p") + std::to_string(g.integer(1, n));
        case 1: return std::to_string(g.integer(0, 9));
        case 2: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", g.uniform(0.01, 10.0));
            return buf;
        }
        default: return "pi";
        }
    }
    const std::string a = random_source(g, n, depth - 1);
    switch (g.integer(0, 8)) {
    case 0: return "(" + a + " + " + random_source(g, n, depth - 1) + ")";
    case 1: return "(" + a + " - " + random_source(g, n, depth - 1) + ")";
    case 2: return a + "*" + random_source(g, n, depth - 1);
    case 3: return "(" + a + ")/(" + random_source(g, n, depth - 1) + ")";
    case 4: return "-" + a;
    case 5: return "(" + a + ")^" + std::to_string(g.integer(0, 4));
    case 6: return "sin(" + a + ")";
    case 7: return "cos(" + a + ")";
    default: return "atan2(" + a + ", " + random_source(g, n, depth - 1) + ")";
    }
}

}  // namespace

TEST_CASE("parse and evaluate simple sources") {
    const Expression p = parse("p1", 1);
    CHECK(p.root().kind == NodeKind::Variable);
    CHECK(p.root().index == 1);
    CHECK(eval_at(p, {0.3, -1.25}) == -1.25);

    CHECK(eval_at(parse("(p1^2 + q1^2)/2", 1), {0.0, 2.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(eval_at(parse("p2^2/2 - cos(q2)", 2), {0.0, 0.0, 0.0, 0.0}) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(eval_at(parse("pi", 1), {0.0, 0.0}) == doctest::Approx(kPi).epsilon(1e-15));
    CHECK(eval_at(parse("2^3^2", 1), {0.0, 0.0}) == doctest::Approx(512.0));
    CHECK(eval_at(parse("-q1^2", 1), {3.0, 0.0}) == doctest::Approx(-9.0));
}

TEST_CASE("value and gradient by dual numbers") {
    const auto a = parse("p1^2/2", 1).eval_with_gradient(std::vector<double>{0.0, 3.0});
    CHECK(a.value == doctest::Approx(4.5));
    CHECK(a.gradient[0] == 0.0);
    CHECK(a.gradient[1] == doctest::Approx(3.0));

    const auto b = parse("-cos(q1)", 1).eval_with_gradient(std::vector<double>{kPi / 2.0, 0.0});
    CHECK(std::abs(b.value) < 1e-15);
    CHECK(b.gradient[0] == doctest::Approx(1.0));
    CHECK(b.gradient[1] == 0.0);

    const auto c = parse("q1*p1", 1).eval_with_gradient(std::vector<double>{-0.7, 1.9});
    CHECK(c.gradient[0] == doctest::Approx(1.9));
    CHECK(c.gradient[1] == doctest::Approx(-0.7));
}

TEST_CASE("integer powers of negative bases are exact") {
    CHECK(eval_at(parse("q1^3", 1), {-2.0, 0.0}) == -8.0);
    CHECK(eval_at(parse("q1^-2", 1), {-2.0, 0.0}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(eval_at(parse("q1^0.5", 1), {-2.0, 0.0}), DomainError);
    CHECK(eval_at(parse("q1^0.5", 1), {4.0, 0.0}) == doctest::Approx(2.0));
}

TEST_CASE("syntax errors carry an offset") {
    CHECK_THROWS_AS(parse("2q1", 1), ParseError);
    CHECK_THROWS_AS(parse("q1 +", 1), ParseError);
    CHECK_THROWS_AS(parse("(q1", 1), ParseError);
    CHECK_THROWS_AS(parse("q2", 1), ParseError);
    CHECK_THROWS_AS(parse("r1", 1), ParseError);
    CHECK_THROWS_AS(parse("sin(q1, p1)", 1), ParseError);
    CHECK_THROWS_AS(parse("atan2(q1)", 1), ParseError);
    CHECK_THROWS_AS(parse("t*q1", 1), ParseError);
    try {
        parse("q1 + $", 1);
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 5);
    }
}

TEST_CASE("time symbol only when allowed") {
    const Expression e = parse("t*q1", 1, ParseOptions{.allow_time = true});
    CHECK(e.uses_time());
    CHECK(e.eval(std::vector<double>{2.0, 0.0}, 1.5) == doctest::Approx(3.0));
}

TEST_CASE("domain errors at evaluation") {
    CHECK_THROWS_AS(eval_at(parse("log(q1)", 1), {-1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(eval_at(parse("sqrt(q1)", 1), {-1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(eval_at(parse("1/q1", 1), {0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(eval_at(parse("atan2(q1, p1)", 1), {0.0, 0.0}), DomainError);
}

TEST_CASE("gradients of catalog integrals match central differences") {
    Gen g(21);
    int cases = 0;
    for (const auto& entry : catalog_list()) {
        for (const auto& e : entry.system.integrals()) {
            const int dim = e.num_vars();
            for (int k = 0; k < 100; ++k, ++cases) {
                const Vec z = g.vec(dim, -2.0, 2.0);
                std::vector<double> zv(z.data(), z.data() + dim);
                const auto vg = e.eval_with_gradient(zv);
                for (int c = 0; c < dim; ++c) {
                    const double h = 1e-6;
                    auto zp = zv, zm = zv;
                    zp[c] += h;
                    zm[c] -= h;
                    const double fd = (e.eval(zp) - e.eval(zm)) / (2.0 * h);
                    INFO(entry.name << " " << e.source() << " coordinate " << c);
                    CHECK(std::abs(vg.gradient[c] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
                }
            }
        }
    }
    CHECK(cases >= 100);
}

TEST_CASE("print then parse is idempotent on random trees") {
    Gen g(22);
    for (int k = 0; k < 300; ++k) {
        const int n = g.integer(1, 3);
        const std::string src = random_source(g, n, 4);
        INFO(src);
        const Expression a = parse(src, n);
        const Expression b = parse(a.print(), n);
        CHECK(a.root() == b.root());
        CHECK(b.print() == a.print());
        const Vec z = g.vec(2 * n, -2.0, 2.0);
        const std::vector<double> zv(z.data(), z.data() + 2 * n);
        double va = 0.0, vb = 0.0;
        bool ea = false, eb = false;
        try {
            va = a.eval(zv);
        } catch (const DomainError&) {
            ea = true;
        }
        try {
            vb = b.eval(zv);
        } catch (const DomainError&) {
            eb = true;
        }
        CHECK(ea == eb);
        if (!ea && !eb) CHECK(va == vb);
    }
}

TEST_CASE("expressions are usable from many threads") {
    const Expression e = parse("p1^2/2 - cos(q1)", 1);
    std::vector<double> out(64);
    for_each_index(Execution::parallel, 64, [&](long i) {
        out[i] = e.eval(std::vector<double>{0.01 * static_cast<double>(i), 1.0});
    });
    for (int i = 0; i < 64; ++i) CHECK(out[i] == 0.5 - std::cos(0.01 * i));
}
