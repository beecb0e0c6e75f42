#include <doctest.h>

#include "reeblab/expr.hpp"
#include "reeblab/forms.hpp"
#include "reeblab/rng.hpp"
#include "reeblab/system.hpp"

using namespace reeblab;

namespace {

FormValue random_form(Rng& rng, int degree, int dim) {
    FormValue f(degree, dim);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(-2.0, 2.0);
    return f;
}

Vec random_vec(Rng& rng, int dim) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.uniform(-2.0, 2.0);
    return v;
}

} // namespace

TEST_CASE("wedge basics") {
    FormValue dx(1, 3), dy(1, 3);
    dx[0] = 1.0;
    dy[1] = 1.0;
    FormValue w = wedge(dx, dy);
    CHECK(w.at({0, 1}) == 1.0);
    CHECK(w.at({0, 2}) == 0.0);
    CHECK(w.at({1, 2}) == 0.0);
    CHECK(wedge(dx, dx).sup_norm() == 0.0);
}

TEST_CASE("standard contact volume") {
    // alpha = dz + x dy at x = 2, d(alpha) = dx ^ dy.
    FormValue alpha(1, 3), dalpha(2, 3);
    alpha.at({2}) = 1.0;
    alpha.at({1}) = 2.0;
    dalpha.at({0, 1}) = 1.0;
    FormValue vol = wedge(alpha, dalpha);
    CHECK(vol.at({0, 1, 2}) == doctest::Approx(1.0));
}

TEST_CASE("contraction basics") {
    FormValue w(2, 3);
    w.at({0, 1}) = 1.0; // dx ^ dy
    Vec ex = Vec::Zero(3), ez = Vec::Zero(3);
    ex[0] = 1.0;
    ez[2] = 1.0;
    FormValue c = contract(ex, w);
    CHECK(c.at({1}) == 1.0);
    CHECK(c.at({0}) == 0.0);
    CHECK(c.at({2}) == 0.0);
    CHECK(contract(ez, w).sup_norm() == 0.0);
}

TEST_CASE("wedge is bilinear and graded-commutative") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 3 + static_cast<int>(rng.next() % 3);
        for (auto [k, l] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 1}}) {
            if (k + l > dim) continue;
            FormValue a = random_form(rng, k, dim);
            FormValue b = random_form(rng, l, dim);
            FormValue c = random_form(rng, k, dim);
            const double s = rng.uniform(-3.0, 3.0);

            FormValue lin = wedge(a + s * c, b) - (wedge(a, b) + s * wedge(c, b));
            CHECK(lin.sup_norm() < 1e-12);

            const double sign = (k * l) % 2 == 0 ? 1.0 : -1.0;
            FormValue comm = wedge(a, b) - sign * wedge(b, a);
            CHECK(comm.sup_norm() < 1e-12);
        }
    }
}

TEST_CASE("contraction is an antiderivation and squares to zero") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 3 + static_cast<int>(rng.next() % 3);
        FormValue a = random_form(rng, 1, dim);
        FormValue b = random_form(rng, 1, dim);
        Vec v = random_vec(rng, dim);

        // iota_v(a ^ b) = (iota_v a) b - a (iota_v b); degree-0 contractions
        // are plain scalars.
        FormValue lhs = contract(v, wedge(a, b));
        FormValue rhs = contract(v, a)[0] * b - contract(v, b)[0] * a;
        CHECK((lhs - rhs).sup_norm() < 1e-12);

        FormValue two = random_form(rng, 2, dim);
        FormValue once = contract(v, two);
        CHECK(std::abs(contract(v, once)[0]) < 1e-12);

        // Same identity one degree up: iota(a ^ w) = (iota a) w - a ^ (iota w).
        FormValue lhs3 = contract(v, wedge(a, two));
        FormValue rhs3 = contract(v, a)[0] * two - wedge(a, contract(v, two));
        CHECK((lhs3 - rhs3).sup_norm() < 1e-12);
    }
}

TEST_CASE("d of d vanishes on random scalar fields") {
    const std::vector<std::string> exprs = {
        "exp(x)*cos(y)", "sin(x*y)+z^3", "x*y*z+atan(x)", "log(3+x^2+y^2)*sin(z)",
        "1/(2+cos(x)+sin(y*z))"};
    Rng rng(13);
    int checked = 0;
    for (const auto& text : exprs) {
        auto ast = std::make_shared<const Ast>(parse_expr(text));
        Bindings b;
        b.coords = {"x", "y", "z"};
        BoundExpr be(ast, b);

        // d0: one-form with coefficients di f, carrying the Hessian rows.
        OneFormField df;
        df.dim = 3;
        for (int i = 0; i < 3; ++i) {
            df.coef.push_back([be, i](const Vec& p) -> Jet1 {
                const Jet2 j = be.jet(p);
                return {j.g[i], j.h.row(i).transpose()};
            });
        }
        for (int trial = 0; trial < 20; ++trial) {
            Vec p = random_vec(rng, 3);
            CHECK(df.d(p).sup_norm() <= 1e-12);
            ++checked;
        }
    }
    CHECK(checked == 100);
}
