#include <doctest.h>

#include "reeblab/errors.hpp"
#include "reeblab/expr.hpp"
#include "reeblab/rng.hpp"

using namespace reeblab;

namespace {

Vec point(std::initializer_list<double> xs) {
    Vec p(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) p[i++] = x;
    return p;
}

BoundExpr bind_expr(const std::string& text, std::vector<std::string> coords,
                    std::map<std::string, double> params = {}) {
    auto ast = std::make_shared<const Ast>(parse_expr(text));
    Bindings b;
    b.coords = std::move(coords);
    b.params = &params;
    return BoundExpr(ast, b);
}

} // namespace

TEST_CASE("parse structure") {
    Ast a = parse_expr("sin(phi)*cos(x)");
    const AstNode& root = a.node(a.root);
    CHECK(root.kind == NodeKind::Mul);
    CHECK(a.node(root.a).kind == NodeKind::Call);
    CHECK(a.node(root.b).kind == NodeKind::Call);
    CHECK(a.node(root.a).name == "sin");

    // Every span lies inside the source.
    for (const AstNode& n : a.nodes) {
        CHECK(n.begin <= n.end);
        CHECK(n.end <= a.source.size());
    }
}

TEST_CASE("evaluation examples") {
    BoundExpr e = bind_expr("1/2*(Pr^2 - (Pa/r)^2)", {"Pr", "Pa", "r"});
    CHECK(e.value(point({2.0, 0.0, 1.0})) == doctest::Approx(2.0));

    BoundExpr f = bind_expr("x^2+y", {"x", "y"});
    CHECK(f.value(point({3.0, 1.0})) == doctest::Approx(10.0));
}

TEST_CASE("parse error carries position and expected set") {
    try {
        parse_expr("sin(");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 1);
        CHECK(e.col == 5);
        CHECK(!e.expected.empty());
    }
    CHECK_THROWS_AS(parse_expr("1 + * 2"), ParseError);
    CHECK_THROWS_AS(parse_expr("foo(2)"), ParseError); // unknown function
    CHECK_THROWS_AS(parse_expr(""), ParseError);
}

TEST_CASE("domain error points at the offending node") {
    BoundExpr e = bind_expr("1/sin(x)", {"x"});
    try {
        e.value(point({0.0}));
        FAIL("expected DomainError");
    } catch (const DomainError& err) {
        // The division node spans the whole "1/sin(x)".
        CHECK(err.begin == 0);
        CHECK(err.end == 8);
    }
}

TEST_CASE("t3 monotone witness derivative") {
    BoundExpr e = bind_expr("log(tan(x/2))", {"x"});
    const Jet2 j = e.jet(point({3.14159265358979323846 / 2}));
    CHECK(j.v == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(j.g[0] == doctest::Approx(1.0).epsilon(1e-12)); // 1/sin(pi/2)
}

TEST_CASE("value mode and jet mode agree exactly") {
    const std::vector<std::string> exprs = {
        "x*y/(1+x^2)", "sin(x)^3+cos(y)", "exp(x/2)-y^2",
        "(x+y)/(2+abs(x))", "atan(x)*sqrt(1+y^2)", "2^x+x^2",
    };
    Rng rng(99);
    int pairs = 0;
    for (const auto& text : exprs) {
        BoundExpr e = bind_expr(text, {"x", "y"});
        for (int k = 0; k < 17; ++k) {
            Vec p = point({rng.uniform(-2, 2), rng.uniform(-2, 2)});
            CAPTURE(text);
            CHECK(e.value(p) == e.jet(p).v); // 0 ulps
            ++pairs;
        }
    }
    CHECK(pairs >= 100);
}

TEST_CASE("pretty-print round trip is structurally identical") {
    const std::vector<std::string> corpus = {
        "sin(phi)*cos(x)",
        "1/2*(Pr^2 - (Pa/r)^2)",
        "-x^2",
        "(-x)^2",
        "a-b-c",
        "a-(b-c)",
        "a/(b/c)",
        "a/b/c",
        "x^y^z",
        "(x^y)^z",
        "2^-3",
        "a*-b",
        "-(x*y)",
        "log(abs(tan(x/2)))",
        "(p1^2+p2^2)/2 - (1-mu)/sqrt((q1-mu)^2+q2^2) - mu/sqrt((q1+1-mu)^2+q2^2) + p1*q2 - p2*q1",
        "P_r^2/2 + x^4*P_alpha^2/8 - P_alpha",
        "1.5e-3*x+2.25",
    };
    for (const auto& text : corpus) {
        Ast a = parse_expr(text);
        const std::string printed = pretty_print(a);
        CAPTURE(text);
        CAPTURE(printed);
        Ast b = parse_expr(printed);
        CHECK(structurally_equal(a, b));
        // Printing is a fixed point after one round.
        CHECK(pretty_print(b) == printed);
    }
}

TEST_CASE("one-form parsing") {
    Ast crit = parse_expr("sin(x)");

    auto terms = parse_oneform("sin(phi)*d(x)/sin(x)^1 + cos(phi)*d(y)", &crit);
    REQUIRE(terms.size() == 2);
    CHECK(terms[0].coord == "x");
    CHECK(terms[0].m == 1);
    CHECK(terms[1].coord == "y");
    CHECK(terms[1].m == 0);

    auto smooth = parse_oneform("d(z) + x*d(y)");
    REQUIRE(smooth.size() == 2);
    CHECK(smooth[0].coord == "z");
    CHECK(!smooth[0].coeff);
    CHECK(smooth[1].coord == "y");

    CHECK_THROWS_AS(parse_oneform("d(x)/y^1", &crit), CriticalMismatchError);
    CHECK_THROWS_AS(parse_oneform("d(x)/sin(x)", &crit), ParseError);   // missing exponent
    CHECK_THROWS_AS(parse_oneform("sin(phi) d(x)"), ParseError);        // missing '*'
}

TEST_CASE("two-form parsing") {
    auto terms = parse_twoform("-4/x^3*d(x)^d(P_r) + d(theta)^d(P_alpha)");
    REQUIRE(terms.size() == 2);
    CHECK(terms[0].negated);
    CHECK(terms[0].coord_a == "x");
    CHECK(terms[0].coord_b == "P_r");
    CHECK(!terms[1].coeff);
}

TEST_CASE("cli point lists") {
    auto xs = parse_point("pi/2,0,pi/2", {});
    REQUIRE(xs.size() == 3);
    CHECK(xs[0] == doctest::Approx(1.5707963267948966));
    CHECK(xs[1] == 0.0);
    auto ys = parse_point("mu+1, 2*mu", {{"mu", 0.25}});
    CHECK(ys[0] == doctest::Approx(1.25));
    CHECK(ys[1] == doctest::Approx(0.5));
}

TEST_CASE("undeclared variable names the culprit") {
    auto ast = std::make_shared<const Ast>(parse_expr("sin(w)+x"));
    Bindings b;
    b.coords = {"x"};
    try {
        BoundExpr be(ast, b);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field_path == "w");
    }
}
