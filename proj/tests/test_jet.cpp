#include <doctest.h>

#include <cmath>

#include "reeblab/expr.hpp"
#include "reeblab/jet.hpp"
#include "reeblab/rng.hpp"

using namespace reeblab;

namespace {

ScalarField field_of(const std::string& text, std::vector<std::string> coords,
                     std::map<std::string, double> params = {}) {
    auto ast = std::make_shared<const Ast>(parse_expr(text));
    Bindings b;
    b.coords = std::move(coords);
    b.params = &params;
    return BoundExpr(ast, b).field();
}

// Central finite differences of a scalar closure.
Vec fd_grad(const ScalarField& f, const Vec& p, double h) {
    Vec g(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        Vec pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        g[i] = (f(pp).v - f(pm).v) / (2 * h);
    }
    return g;
}

Mat fd_hess(const ScalarField& f, const Vec& p, double h) {
    const Eigen::Index n = p.size();
    Mat out(n, n);
    const double f0 = f(p).v;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            double v;
            if (i == j) {
                Vec pp = p, pm = p;
                pp[i] += h;
                pm[i] -= h;
                v = (f(pp).v - 2 * f0 + f(pm).v) / (h * h);
            } else {
                Vec a = p, b = p, c = p, d = p;
                a[i] += h;
                a[j] += h;
                b[i] += h;
                b[j] -= h;
                c[i] -= h;
                c[j] += h;
                d[i] -= h;
                d[j] -= h;
                v = (f(a).v - f(b).v - f(c).v + f(d).v) / (4 * h * h);
            }
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

} // namespace

TEST_CASE("polynomial jet by hand") {
    auto f = field_of("x*y^2", {"x", "y"});
    Vec p(2);
    p << 2.0, 3.0;
    const Jet2 j = jet_eval(f, p);
    CHECK(j.v == doctest::Approx(18.0).epsilon(1e-15));
    CHECK(j.g[0] == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(j.g[1] == doctest::Approx(12.0).epsilon(1e-15));
    CHECK(j.h(0, 0) == doctest::Approx(0.0));
    CHECK(j.h(0, 1) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(j.h(1, 0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(j.h(1, 1) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("sin jet at zero") {
    auto f = field_of("sin(x)", {"x"});
    Vec p(1);
    p << 0.0;
    const Jet2 j = jet_eval(f, p);
    CHECK(j.v == 0.0);
    CHECK(j.g[0] == 1.0);
    CHECK(j.h(0, 0) == 0.0);
}

TEST_CASE("rpc3bp cartesian hamiltonian jet against hand-derived partials") {
    const double mu = 0.5;
    auto h = field_of(
        "(p1^2+p2^2)/2 - (1-mu)/sqrt((q1-mu)^2+q2^2) - mu/sqrt((q1+1-mu)^2+q2^2) + p1*q2 - p2*q1",
        {"q1", "q2", "p1", "p2"}, {{"mu", mu}});
    Vec p(4);
    p << 2.0, 0.0, 0.0, 1.0;
    const Jet2 j = jet_eval(h, p);

    // Independent oracle: partials derived by hand.
    const double d1 = 1.5, d2 = 2.5; // |q - (mu,0)|, |q + (1-mu,0)|
    const double hv = 0.5 - (1 - mu) / d1 - mu / d2 + (0.0 * 0.0 - 1.0 * 2.0);
    CHECK(j.v == doctest::Approx(hv).epsilon(1e-15));
    const double dq1 = (1 - mu) * (p[0] - mu) / std::pow(d1, 3) +
                       mu * (p[0] + 1 - mu) / std::pow(d2, 3) - p[3];
    const double dq2 = (1 - mu) * p[1] / std::pow(d1, 3) + mu * p[1] / std::pow(d2, 3) + p[2];
    CHECK(j.g[0] == doctest::Approx(dq1).epsilon(1e-14));
    CHECK(j.g[1] == doctest::Approx(dq2).epsilon(1e-14));
    CHECK(j.g[2] == doctest::Approx(p[2] + p[1]).epsilon(1e-14));
    CHECK(j.g[3] == doctest::Approx(p[3] - p[0]).epsilon(1e-14));

    auto pot_hess = [&](double m, double ax) {
        Mat hh = Mat::Zero(2, 2);
        const double dx = p[0] - ax, dy = p[1];
        const double d = std::sqrt(dx * dx + dy * dy);
        const double d3 = d * d * d, d5 = d3 * d * d;
        hh(0, 0) = m * (1.0 / d3 - 3.0 * dx * dx / d5);
        hh(1, 1) = m * (1.0 / d3 - 3.0 * dy * dy / d5);
        hh(0, 1) = hh(1, 0) = m * (-3.0 * dx * dy / d5);
        return hh;
    };
    Mat want = Mat::Zero(4, 4);
    want.topLeftCorner(2, 2) = pot_hess(1 - mu, mu) + pot_hess(mu, -(1 - mu));
    want(2, 2) = want(3, 3) = 1.0;
    want(1, 2) = want(2, 1) = 1.0;
    want(0, 3) = want(3, 0) = -1.0;
    CHECK((j.h - want).cwiseAbs().maxCoeff() < 1e-13);

    // Cross-check against central finite differences.
    CHECK((j.g - fd_grad(h, p, 1e-5)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((j.h - fd_hess(h, p, 1e-4)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("random smooth expressions match finite differences") {
    const std::vector<std::string> exprs = {
        "sin(x)*cos(y)+exp(x/4)",
        "x^3-2*x*y+y^2/(2+sin(x))",
        "atan(x*y)+sqrt(4+x^2)",
        "log(2+cos(x)+y^2)",
        "tan(x/3)+y*exp(-x^2/2)",
        "1/(2+sin(x)*sin(y))",
        "abs(2+x^2)^2/(3+cos(y))",
        "x^2*y-(x/(3+y^2))^3",
    };
    Rng rng(2024);
    for (const auto& text : exprs) {
        auto f = field_of(text, {"x", "y"});
        for (int trial = 0; trial < 12; ++trial) {
            Vec p(2);
            p << rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2);
            const Jet2 j = jet_eval(f, p);
            const Vec g = fd_grad(f, p, 1e-5);
            const Mat hh = fd_hess(f, p, 2e-4);
            const double gs = std::max(1.0, g.cwiseAbs().maxCoeff());
            const double hs = std::max(1.0, hh.cwiseAbs().maxCoeff());
            CAPTURE(text);
            CHECK((j.g - g).cwiseAbs().maxCoeff() / gs < 1e-6);
            CHECK((j.h - hh).cwiseAbs().maxCoeff() / hs < 2e-5);
            CHECK((j.h - j.h.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("domain errors") {
    auto f = field_of("log(x)", {"x"});
    Vec p(1);
    p << -1.0;
    CHECK_THROWS_AS(f(p), DomainError);
    auto g = field_of("1/x", {"x"});
    p << 0.0;
    CHECK_THROWS_AS(g(p), DomainError);
    auto h = field_of("x^(1/2)", {"x"});
    p << -2.0;
    CHECK_THROWS_AS(h(p), DomainError);
}

TEST_CASE("integer powers accept negative bases") {
    auto f = field_of("x^3+x^(-2)", {"x"});
    Vec p(1);
    p << -2.0;
    const Jet2 j = jet_eval(f, p);
    CHECK(j.v == doctest::Approx(-8.0 + 0.25).epsilon(1e-15));
    CHECK(j.g[0] == doctest::Approx(12.0 + 0.25).epsilon(1e-14)); // 3x^2 - 2x^-3
}
