#include <doctest.h>

#include <cmath>

#include "reeblab/config.hpp"
#include "reeblab/errors.hpp"
#include "reeblab/gallery.hpp"
#include "reeblab/reeb.hpp"
#include "reeblab/rng.hpp"

using namespace reeblab;

namespace {
constexpr double kPi = 3.14159265358979323846;

Vec pt(std::initializer_list<double> xs) {
    Vec p(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) p[i++] = x;
    return p;
}

// Closed-form S3 Reeb field solved by hand from iota_R omega = lambda dF,
// alpha(R) = 1 (independent of the library's least-squares route).
Vec s3_reeb_closed_form(const Vec& p) {
    const double y1 = p[1];
    const double lam = 1.0 / (1.0 + y1 * y1);
    Vec r(4);
    r << -2.0 * p[0] * y1, 2.0 * p[0] * p[0], -2.0 * p[3], 2.0 * p[2];
    return lam * r;
}

SystemSpec darboux_like() {
    // Smooth standard contact form alpha = x dy + dz.
    const std::string doc = R"toml(
spec_version = 1
name = "darboux"

[[coordinates]]
name = "x"

[[coordinates]]
name = "y"

[[coordinates]]
name = "z"

[form]
ambient = "x*d(y) + d(z)"

[sampling]
lo = [-1.0, -1.0, -1.0]
hi = [1.0, 1.0, 1.0]
)toml";
    return compile_system(parse_system_text(doc));
}

} // namespace

TEST_CASE("t3 reeb field matches the closed form off Z") {
    for (int m : {1, 2, 3}) {
        SystemSpec sys = builtin("t3_bm", {{"m", double(m)}});
        Rng rng(100 + m);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            Vec p = sys.off_z_sampler(rng);
            const ReebSolution sol = reeb_off_Z(sys, p);
            Vec want(3);
            want << std::sin(p[2]) * std::pow(std::sin(p[0]), m), std::cos(p[2]), 0.0;
            worst = std::max(worst, (sol.vector - want).cwiseAbs().maxCoeff());
            CHECK(sol.alpha_residual <= 1e-9);
            CHECK(sol.dalpha_residual <= 1e-8);
        }
        CAPTURE(m);
        CHECK(worst <= 1e-10);
    }

    // Hand-checked point value.
    SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
    const ReebSolution sol = reeb_off_Z(sys, pt({kPi / 2, 0.0, kPi / 4}));
    CHECK(sol.vector[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(sol.vector[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(std::abs(sol.vector[2]) < 1e-12);
}

TEST_CASE("darboux reeb field is d/dz") {
    SystemSpec sys = darboux_like();
    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        Vec p = rng.box(sys.sample_lo, sys.sample_hi);
        const ReebSolution sol = reeb_off_Z(sys, p);
        CHECK(std::abs(sol.vector[0]) < 1e-12);
        CHECK(std::abs(sol.vector[1]) < 1e-12);
        CHECK(sol.vector[2] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("s3 reeb solve against the dense 5x4 oracle and the closed form") {
    SystemSpec sys = builtin("s3_b");
    const Vec p = pt({std::sqrt(0.5), 0.0, std::sqrt(0.5), 0.0});
    const ReebSolution sol = reeb_off_Z(sys, p);

    // Independent oracle: assemble the 5x4 least-squares system from
    // hand-coded alpha = iota_X omega and d(alpha) = omega on T_p S^3.
    const double x1 = p[0], y1 = p[1], x2 = p[2], y2 = p[3];
    Vec a(4);
    a << -y1 / x1, 0.5, -0.5 * y2, 0.5 * x2;
    Mat A = Mat::Zero(4, 4); // d(alpha) = dx1/x1 ^ dy1 + dx2 ^ dy2
    A(0, 1) = 1.0 / x1;
    A(1, 0) = -1.0 / x1;
    A(2, 3) = 1.0;
    A(3, 2) = -1.0;
    Vec dF = 2.0 * p;
    Mat E = orthonormal_complement(dF.transpose(), 4);
    Mat M(5, 4);
    Vec rhs = Vec::Zero(5);
    for (int i = 0; i < 3; ++i) M.row(i) = (A * E.col(i)).transpose();
    M.row(3) = a.transpose();
    rhs[3] = 1.0;
    M.row(4) = dF.transpose();
    Vec oracle = M.colPivHouseholderQr().solve(rhs);

    CHECK((sol.vector - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((sol.vector - s3_reeb_closed_form(p)).cwiseAbs().maxCoeff() < 1e-10);

    Rng rng(77);
    for (int i = 0; i < 50; ++i) {
        Vec q = sys.off_z_sampler(rng);
        const ReebSolution s = reeb_off_Z(sys, q);
        CHECK((s.vector - s3_reeb_closed_form(q)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(s.alpha_residual <= 1e-9);
        CHECK(s.dalpha_residual <= 1e-8);
        // Tangency to the sphere.
        CHECK(std::abs(2.0 * q.dot(s.vector)) < 1e-9);
    }
}

TEST_CASE("near-critical and degenerate guards") {
    SystemSpec t3 = builtin("t3_bm", {{"m", 1.0}});
    CHECK_THROWS_AS(reeb_off_Z(t3, pt({1e-9, 0.0, 1.0})), NearCriticalError);

    SystemSpec s3 = builtin("s3_b");
    CHECK_THROWS_AS(reeb_off_Z(s3, pt({0.6, 0.5, 0.5, 0.5})), OffLevelSetError);

    // alpha = dz alone is nowhere contact.
    const std::string doc = R"toml(
spec_version = 1
name = "degenerate"

[[coordinates]]
name = "x"

[[coordinates]]
name = "y"

[[coordinates]]
name = "z"

[hamiltonian]
h = "z"
omega = "d(x)^d(y)"
liouville = ["0", "0", "0"]

[sampling]
lo = [-1.0, -1.0, -1.0]
hi = [1.0, 1.0, 1.0]
)toml";
    (void)doc;
    OneFormField dz_only;
    dz_only.dim = 3;
    dz_only.coef.resize(3);
    dz_only.coef[2] = [](const Vec&) { return Jet1{1.0, Vec::Zero(3)}; };
    SystemSpec degen;
    degen.name = "dz-only";
    degen.coords = {{"x", false, 0}, {"y", false, 0}, {"z", false, 0}};
    degen.alpha = dz_only;
    CHECK_THROWS_AS(reeb_off_Z(degen, pt({0.1, 0.2, 0.3})), DegenerateError);
}

TEST_CASE("decompose_on_Z reproduces the hand decompositions") {
    SUBCASE("t3") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        const ZFrameData zf = decompose_on_Z(sys, pt({0.0, 1.2, 0.8}));
        CHECK(zf.u == doctest::Approx(std::sin(0.8)).epsilon(1e-14));
        CHECK(zf.beta[1] == doctest::Approx(std::cos(0.8)).epsilon(1e-14));
        CHECK(zf.beta[0] == 0.0);
        CHECK(std::abs(std::abs(zf.theta_det) - 1.0) < 1e-12);
    }
    SUBCASE("s3") {
        SystemSpec sys = builtin("s3_b");
        const Vec p = pt({0.0, 0.6, 0.8, 0.0});
        const ZFrameData zf = decompose_on_Z(sys, p);
        CHECK(zf.u == doctest::Approx(-0.6).epsilon(1e-14));
        CHECK(zf.du[1] == doctest::Approx(-1.0).epsilon(1e-14));
    }
    SUBCASE("mcgehee cylinder") {
        SystemSpec sys = builtin("rpc3bp_mcgehee", {{"mu", 0.0122771}, {"c", 1.0}});
        const Vec p = infinity_cylinder_point(0.7, 1.0, 1.0);
        const ZFrameData zf = decompose_on_Z(sys, p);
        CHECK(zf.u == doctest::Approx(4.0).epsilon(1e-14)); // 4 P_r
        CHECK(zf.beta[1] == doctest::Approx(-p[3]).epsilon(1e-14)); // -P_alpha dtheta
        // Theta on the cylinder is (-2 P_r^2 - 4c) dP_r ^ dtheta in
        // coordinates; on the orthonormal tangent frame the magnitude picks
        // up 1/sqrt(1 + P_r^2) from the (dP_r + P_r dP_alpha) direction.
        const double want = (2.0 * 1.0 + 4.0) / std::sqrt(2.0);
        CHECK(std::abs(std::abs(zf.theta_det) - want) < 1e-10);
    }
}

TEST_CASE("reeb_on_Z solves iota_R Theta = du") {
    SUBCASE("t3 gives cos(phi) d/dy on both components") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        for (double x0 : {0.0, kPi}) {
            for (double phi : {0.3, 1.2, 2.5, 4.0}) {
                const ReebSolution sol = reeb_on_Z(sys, pt({x0, 0.7, phi}));
                CHECK(std::abs(sol.vector[0]) < 1e-12);
                CHECK(sol.vector[1] == doctest::Approx(std::cos(phi)).epsilon(1e-11));
                CHECK(std::abs(sol.vector[2]) < 1e-12);
                CHECK(sol.dalpha_residual <= 1e-10);
            }
        }
    }
    SUBCASE("s3 gives the rotation with rate 2/(1+y1^2)") {
        SystemSpec sys = builtin("s3_b");
        const ReebSolution at_eq = reeb_on_Z(sys, pt({0.0, 0.0, 1.0, 0.0}));
        Vec want(4);
        want << 0.0, 0.0, 0.0, 2.0; // -2 y2 dx2 + 2 x2 dy2 at (x2,y2)=(1,0)
        CHECK((at_eq.vector - want).cwiseAbs().maxCoeff() < 1e-10);

        const double y1 = 0.5;
        const double rr = std::sqrt(1.0 - y1 * y1);
        const ReebSolution sol = reeb_on_Z(sys, pt({0.0, y1, rr, 0.0}));
        const double rate = 2.0 / (1.0 + y1 * y1);
        CHECK(sol.vector[3] == doctest::Approx(rate * rr).epsilon(1e-10));
        CHECK(std::abs(sol.vector[1]) < 1e-10);
    }
    SUBCASE("s2s1 reeb vanishes identically on Z") {
        SystemSpec sys = builtin("s2s1");
        Rng rng(15);
        for (int i = 0; i < 30; ++i) {
            Vec p = sys.on_z_sampler(rng);
            const ReebSolution sol = reeb_on_Z(sys, project_onto_Z(sys, p));
            CHECK(sol.vector.norm() <= 1e-10);
        }
    }
    SUBCASE("mcgehee cylinder rotates at 2/(P_r^2 + 2c)") {
        SystemSpec sys = builtin("rpc3bp_mcgehee", {{"mu", 0.0122771}, {"c", 1.0}});
        for (double prv : {0.0, 0.5, 1.0, -1.5}) {
            const Vec p = infinity_cylinder_point(1.1, prv, 1.0);
            const ReebSolution sol = reeb_on_Z(sys, p);
            const double rate = 2.0 / (prv * prv + 2.0);
            CHECK(sol.vector[1] == doctest::Approx(rate).epsilon(1e-10)); // theta direction
            CHECK(std::abs(sol.vector[0]) < 1e-12);                        // tangent to x = 0
        }
    }
}

TEST_CASE("on-Z hamiltonian residuals and u spread over Z samples") {
    for (const char* name : {"t3_bm", "s3_b"}) {
        SystemSpec sys = builtin(name);
        Rng rng(hash_string(name));
        double worst = 0.0, umin = 1e300, umax = -1e300;
        for (int i = 0; i < 200; ++i) {
            Vec p = project_onto_Z(sys, sys.on_z_sampler(rng));
            const ReebSolution sol = reeb_on_Z(sys, p);
            worst = std::max(worst, sol.dalpha_residual);
            const double u = sys.sing->u(p).v;
            umin = std::min(umin, u);
            umax = std::max(umax, u);
        }
        CAPTURE(name);
        CHECK(worst <= 1e-8);
        CHECK(umax - umin >= 0.1);
    }
}

TEST_CASE("contact coefficient") {
    SUBCASE("t3 family is +-1 for every order") {
        for (int m : {1, 2, 3}) {
            SystemSpec sys = builtin("t3_bm", {{"m", double(m)}});
            Rng rng(m);
            for (int i = 0; i < 40; ++i) {
                Vec p = sys.off_z_sampler(rng);
                CHECK(std::abs(std::abs(contact_coefficient(sys, p)) - 1.0) < 1e-10);
            }
            // On Z from the decomposition.
            CHECK(std::abs(std::abs(contact_coefficient(sys, pt({0.0, 0.3, 0.9}))) - 1.0) < 1e-12);
            CHECK(std::abs(std::abs(contact_coefficient(sys, pt({kPi, 0.3, 0.9}))) - 1.0) < 1e-12);
        }
    }
    SUBCASE("standard contact form has coefficient one") {
        SystemSpec sys = darboux_like();
        CHECK(contact_coefficient(sys, pt({0.4, -0.2, 0.7})) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("degenerate dz flags zero") {
        OneFormField dz_only;
        dz_only.dim = 3;
        dz_only.coef.resize(3);
        dz_only.coef[2] = [](const Vec&) { return Jet1{1.0, Vec::Zero(3)}; };
        SystemSpec degen;
        degen.name = "dz-only";
        degen.coords = {{"x", false, 0}, {"y", false, 0}, {"z", false, 0}};
        degen.alpha = dz_only;
        CHECK(contact_coefficient(degen, pt({0.1, 0.2, 0.3})) == doctest::Approx(0.0));
    }
    SUBCASE("single sign per connected region") {
        SystemSpec sys = builtin("s2s1");
        Rng rng(4);
        double pos = 0.0;
        for (int i = 0; i < 50; ++i) {
            const double c = contact_coefficient(sys, sys.off_z_sampler(rng));
            if (pos == 0.0) pos = c > 0 ? 1.0 : -1.0;
            CHECK(c * pos > 1e-6);
        }
    }
}

TEST_CASE("r-plus invariance verdicts match the examples") {
    SystemSpec t3 = builtin("t3_bm", {{"m", 1.0}});
    RPlusReport r1 = r_plus_invariance_check(t3, 0.1, 200, 7);
    CHECK(r1.invariant);

    SystemSpec s3 = builtin("s3_b");
    RPlusReport r2 = r_plus_invariance_check(s3, 0.1, 200, 7);
    CHECK(!r2.invariant);

    // Constructed witness: u = sin(phi) + z^2 with z = sin(x); the collar
    // derivative of u is 2z, so the sup over |z| <= 0.1 is about 0.2.
    const std::string doc = R"toml(
spec_version = 1
name = "witness"

[[coordinates]]
name = "x"
periodic = true
period = 6.283185307179586

[[coordinates]]
name = "y"
periodic = true
period = 6.283185307179586

[[coordinates]]
name = "phi"
periodic = true
period = 6.283185307179586

[form]
critical = "sin(x)"
m = 1
u = "sin(phi) + sin(x)^2"
beta = "cos(phi)*d(y)"

[sampling]
lo = [0.0, 0.0, 0.0]
hi = [6.283185307179586, 6.283185307179586, 6.283185307179586]
)toml";
    SystemSpec w = compile_system(parse_system_text(doc));
    RPlusReport r3 = r_plus_invariance_check(w, 0.1, 400, 7);
    CHECK(!r3.invariant);
    CHECK(r3.sup_du_dz == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("desingularization of the even t3 form") {
    SystemSpec sys = builtin("t3_bm", {{"m", 2.0}});
    const double eps = 0.1;
    SystemSpec smooth = desingularize_even(sys, eps);

    // Exact agreement outside the collar (same expressions, same solve).
    const Vec probe = pt({0.5, 0.0, 1.0});
    REQUIRE(std::abs(std::sin(0.5)) >= eps);
    const Vec a = reeb_off_Z(sys, probe).vector;
    const Vec b = reeb_off_Z(smooth, probe).vector;
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);

    // Matching conditions of the quartic blend at the seam.
    const int m = 2, k = 1;
    const double h = 1e-10;
    CHECK(desing_fprime(m, eps, eps) == doctest::Approx(std::pow(eps, -2 * k)).epsilon(1e-12));
    const double dleft = (desing_fprime(m, eps, eps) - desing_fprime(m, eps, eps - 1e-6)) / 1e-6;
    CHECK(dleft == doctest::Approx(-2 * k * std::pow(eps, -2 * k - 1)).epsilon(1e-3));
    (void)h;

    // f' positive on the collar, minimum at the seam.
    double fmin = 1e300;
    for (int i = 0; i <= 2000; ++i)
        fmin = std::min(fmin, desing_fprime(m, eps, -eps + 2 * eps * i / 2000.0));
    CHECK(fmin > 0.0);
    CHECK(fmin == doctest::Approx(std::pow(eps, -2 * k)).epsilon(1e-9));

    // Inside the collar the fields genuinely differ.
    const Vec inside = pt({0.03, 0.0, 1.0});
    const Vec c = reeb_off_Z(sys, inside).vector;
    const Vec d = reeb_off_Z(smooth, inside).vector;
    CHECK((c - d).norm() > 1e-3);

    // Convergence trend: sup Reeb difference over a fixed annulus decreases
    // along eps = 0.2, 0.1, 0.05.
    Rng rng(55);
    std::vector<Vec> annulus;
    while (annulus.size() < 60) {
        Vec p = sys.off_z_sampler(rng);
        const double z = std::abs(std::sin(p[0]));
        if (z >= 5e-3 && z <= 0.02) annulus.push_back(p);
    }
    std::vector<double> sups;
    for (double e : {0.2, 0.1, 0.05}) {
        SystemSpec sm = desingularize_even(sys, e);
        double sup = 0.0;
        for (const Vec& p : annulus)
            sup = std::max(sup, (reeb_off_Z(sys, p).vector - reeb_off_Z(sm, p).vector).norm());
        sups.push_back(sup);
    }
    CHECK(sups[1] < sups[0]);
    CHECK(sups[2] < sups[1]);

    // Odd orders are the folded case and unsupported.
    SystemSpec odd = builtin("t3_bm", {{"m", 1.0}});
    CHECK_THROWS_AS(desingularize_even(odd, 0.1), OddOrderError);
    // S3 is not almost convex (m = 1 is also odd, so the order gate fires
    // first; build an even-order non-convex witness instead).
    SystemSpec s3 = builtin("s3_b");
    CHECK_THROWS_AS(desingularize_even(s3, 0.1), OddOrderError);
}

TEST_CASE("symplectization residual and s-invariance") {
    SystemSpec t3 = builtin("t3_bm", {{"m", 1.0}});
    const Vec p = pt({kPi / 2, 0.0, kPi / 4});
    const double r0 = symplectization_check(t3, p, 0.0);
    const double r1 = symplectization_check(t3, p, 1.0);
    CHECK(r0 <= 1e-9);
    CHECK(r1 <= 1e-9);
    CHECK(std::abs(r0 - r1) <= 1e-9);

    SystemSpec s3 = builtin("s3_b");
    Rng rng(8);
    for (int i = 0; i < 5; ++i)
        CHECK(symplectization_check(s3, s3.off_z_sampler(rng), 0.5) <= 1e-9);
}
