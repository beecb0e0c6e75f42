#include <doctest.h>

#include <cmath>

#include "reeblab/config.hpp"
#include "reeblab/errors.hpp"
#include "reeblab/gallery.hpp"
#include "reeblab/hunt.hpp"
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
} // namespace

TEST_CASE("find_zeros_on_Z") {
    SUBCASE("s3 has exactly the two poles") {
        SystemSpec sys = builtin("s3_b");
        ZeroFindings zf = find_zeros_on_Z(sys, sys.z_seed_grid(14));
        CHECK(!zf.degenerate_family);
        CHECK(zf.families.empty());
        REQUIRE(zf.isolated.size() == 2);
        CHECK(sys.wrap_dist(zf.isolated[0], pt({0.0, -1.0, 0.0, 0.0})) < 1e-9);
        CHECK(sys.wrap_dist(zf.isolated[1], pt({0.0, 1.0, 0.0, 0.0})) < 1e-9);
        for (const Vec& z : zf.isolated)
            CHECK(reeb_on_Z_at(sys, z, 1e-6).vector.norm() <= 1e-10);
    }
    SUBCASE("t3 zeros come as y-families at cos(phi) = 0") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        ZeroFindings zf = find_zeros_on_Z(sys, sys.z_seed_grid(8));
        CHECK(!zf.degenerate_family);
        // Two Z components x in {0, pi} times phi in {pi/2, 3pi/2}.
        CHECK(zf.families.size() == 4);
        CHECK(zf.isolated.empty());
        for (const ZeroFamily& f : zf.families) {
            CHECK(f.extent > 1.0); // spread along the free y circle
            const double phi = f.representative[2];
            CHECK(std::abs(std::cos(phi)) < 1e-10);
            CHECK(std::min(std::abs(std::sin(f.representative[0])),
                           std::abs(std::sin(f.representative[0] - kPi))) < 1e-12);
        }
    }
    SUBCASE("s2s1 reports the degenerate family verdict") {
        SystemSpec sys = builtin("s2s1");
        ZeroFindings zf = find_zeros_on_Z(sys, sys.z_seed_grid(6));
        CHECK(zf.degenerate_family);
    }
}

TEST_CASE("refine_periodic") {
    SUBCASE("s3 on-Z periods follow pi (1 + y1^2)") {
        SystemSpec sys = builtin("s3_b");
        for (double y1 : {0.0, 0.5}) {
            const double rr = std::sqrt(1.0 - y1 * y1);
            PeriodicOrbitRecord rec =
                refine_periodic_auto(sys, pt({0.0, y1, rr, 0.0}), 4.0, true);
            CHECK(rec.on_z);
            CHECK(rec.closure_residual <= 1e-6);
            CHECK(rec.period == doctest::Approx(kPi * (1.0 + y1 * y1)).epsilon(1e-6));
        }
    }
    SUBCASE("infinity cylinder periods follow pi (P_r^2 + 2c)") {
        SystemSpec sys = builtin("rpc3bp_infinity_cylinder", {{"mu", 0.0122771}, {"c", 1.0}});
        for (double pr : {0.0, 1.0, 1.5}) {
            PeriodicOrbitRecord rec =
                refine_periodic_auto(sys, infinity_cylinder_point(0.3, pr, 1.0), 12.0, true);
            CHECK(rec.closure_residual <= 1e-6);
            CHECK(rec.period == doctest::Approx(kPi * (pr * pr + 2.0)).epsilon(1e-6));
        }
    }
    SUBCASE("t3 on-Z orbits close after one y loop") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        PeriodicOrbitRecord rec = refine_periodic_auto(sys, pt({0.0, 0.2, 1.0}), 10.0, true);
        CHECK(rec.closure_residual <= 1e-6);
        CHECK(rec.period == doctest::Approx(2 * kPi / std::cos(1.0)).epsilon(1e-8));
    }
}

TEST_CASE("scan_periodic") {
    SUBCASE("t3 on-Z sweep finds candidates away from the singular circles") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        std::vector<Vec> grid;
        for (int i = 0; i < 8; ++i) grid.push_back(pt({0.0, 0.4, 0.25 + i * 0.15}));
        ScanResult res = scan_periodic(sys, grid, true, 80.0);
        CHECK(!res.candidates.empty());
    }
    SUBCASE("s3 off-Z sweep in the monotone region has no candidates") {
        SystemSpec sys = builtin("s3_b");
        std::vector<Vec> grid;
        for (int i = 0; i < 8; ++i) {
            Vec p = pt({0.25 + 0.08 * i, 0.1, 0.6, 0.2});
            grid.push_back(p / p.norm());
        }
        ScanResult res = scan_periodic(sys, grid, false, 40.0);
        CHECK(res.candidates.empty());
    }
    SUBCASE("trap cylinders carry no periodic candidates off Z") {
        SystemSpec sys = builtin("trap_chart", {{"eps", 0.1}, {"k", 1.0}});
        std::vector<Vec> grid;
        for (double t : {0.05, 0.08, 0.12, 0.2}) grid.push_back(pt({t, 0.0, 0.5}));
        ScanResult res = scan_periodic(sys, grid, false, 400.0);
        CHECK(res.candidates.empty());
        // Oracle behind the assertion: xi' = e^{-2t}/f' never vanishes.
        for (double t : {0.05, 0.08, 0.12, 0.2}) {
            const double fp = trap_fprime_value(t, 0.1, 1);
            CHECK(std::exp(-2 * t) / fp > 0.0);
        }
    }
}

TEST_CASE("detect_singular_orbit") {
    SUBCASE("s3 pole-to-pole orbit") {
        SystemSpec sys = builtin("s3_b");
        SingularOrbitRecord rec = detect_singular_orbit(sys, pt({1.0, 0.0, 0.0, 0.0}), 40.0);
        // Forward limit (0, 1, 0, 0), backward limit (0, -1, 0, 0).
        CHECK(sys.wrap_dist(rec.p_plus, pt({0.0, 1.0, 0.0, 0.0})) < 1e-8);
        CHECK(sys.wrap_dist(rec.p_minus, pt({0.0, -1.0, 0.0, 0.0})) < 1e-8);
        CHECK(rec.final_distance_plus <= 1e-3);
        CHECK(rec.final_distance_minus <= 1e-3);
        CHECK(rec.field_norm_plus <= 1e-8);
        CHECK(rec.field_norm_minus <= 1e-8);
        CHECK(rec.abs_z_plus <= 1e-10);
        CHECK(rec.abs_z_minus <= 1e-10);

        // The limits appear among the Z zeros.
        ZeroFindings zf = find_zeros_on_Z(sys, sys.z_seed_grid(14));
        bool plus_found = false, minus_found = false;
        for (const Vec& z : zf.isolated) {
            if (sys.wrap_dist(z, rec.p_plus) < 1e-6) plus_found = true;
            if (sys.wrap_dist(z, rec.p_minus) < 1e-6) minus_found = true;
        }
        CHECK(plus_found);
        CHECK(minus_found);
    }
    SUBCASE("t3 fixed-point-to-fixed-point orbit") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        SingularOrbitRecord rec = detect_singular_orbit(sys, pt({kPi / 2, 0.0, kPi / 2}), 40.0);
        CHECK(sys.wrap_dist(rec.p_plus, pt({kPi, 0.0, kPi / 2})) < 1e-6);
        CHECK(sys.wrap_dist(rec.p_minus, pt({0.0, 0.0, kPi / 2})) < 1e-6);
        CHECK(rec.field_norm_plus <= 1e-8);
        CHECK(rec.field_norm_minus <= 1e-8);
    }
    SUBCASE("t3 with cos(phi) away from zero is inconclusive") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        CHECK_THROWS_AS(detect_singular_orbit(sys, pt({kPi / 2, 0.0, kPi / 4}), 30.0),
                        InconclusiveError);
    }
}

TEST_CASE("witness_check") {
    SUBCASE("t3 log tan witness with rate sin(phi)") {
        SystemSpec sys = builtin("t3_bm", {{"m", 1.0}});
        VectorFieldFn field = reeb_field(sys);
        IntegratorOptions opt;
        opt.rtol = 1e-11;
        opt.atol = 1e-13;
        ScalarField crit = sys.sing->crit;
        opt.critical = [crit](const Vec& p) { return crit(p).v; };
        Rng rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            Vec p0 = pt({rng.uniform(0.5, 2.6), rng.uniform(0, 6.2),
                         rng.uniform(0.15, kPi - 0.15)});
            OrbitTrace tr = integrate(field, p0, 0.0, 3.0, opt);
            WitnessReport rep =
                witness_check(sys, tr, sys.witnesses[0], &sys.witness_rates[0], field);
            CHECK(rep.monotone);
            CHECK(rep.rate_checked);
            CHECK(rep.max_rate_residual <= 1e-8);
            CHECK(rep.pass);
        }
    }
    SUBCASE("s3 y1 witness is strictly monotone off Z") {
        SystemSpec sys = builtin("s3_b");
        VectorFieldFn field = reeb_field(sys);
        IntegratorOptions opt;
        ScalarField crit = sys.sing->crit;
        opt.critical = [crit](const Vec& p) { return crit(p).v; };
        Rng rng(5);
        for (int trial = 0; trial < 5; ++trial) {
            Vec p0 = sys.off_z_sampler(rng);
            OrbitTrace tr = integrate(field, p0, 0.0, 4.0, opt);
            WitnessReport rep = witness_check(sys, tr, sys.witnesses[0], nullptr, field);
            CHECK(rep.monotone);
            CHECK(rep.pass);
        }
    }
    SUBCASE("constant field with witness z has rate one") {
        SystemSpec dummy;
        dummy.coords = {{"x", false, 0}, {"y", false, 0}, {"z", false, 0}};
        VectorFieldFn field = [](const Vec& p) {
            Vec v = Vec::Zero(p.size());
            v[2] = 1.0;
            return v;
        };
        OrbitTrace tr = integrate(field, pt({0.0, 0.0, 0.0}), 0.0, 5.0);
        ScalarField wz = [](const Vec& p) { return Jet2::variable(p[2], 2, 3); };
        ScalarField one = [](const Vec& p) { return Jet2::constant(1.0, 3); };
        WitnessReport rep = witness_check(dummy, tr, wz, &one, field);
        CHECK(rep.monotone);
        CHECK(rep.max_rate_residual <= 1e-12);
    }
}

TEST_CASE("trap diagnostics") {
    const double eps = 0.1;
    SystemSpec trap = builtin("trap_chart", {{"eps", eps}, {"k", 1.0}});
    auto rows = trap_diagnostics(trap, {0.01, 0.05, 0.2}, eps, 1);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].dtheta_per_xi == doctest::Approx(9999.0).epsilon(1e-9));
    CHECK(rows[1].dtheta_per_xi == doctest::Approx(399.0).epsilon(1e-9));
    CHECK(std::abs(rows[2].dtheta_per_xi) <= 1e-9);
    for (const auto& r : rows) {
        CHECK(r.formula_residual <= 1e-10);
        CHECK(std::abs(r.dtheta_per_xi - r.expected) <= 1e-9 * std::max(1.0, r.expected));
    }

    // On Z the field is exactly the rotation.
    auto onz = trap_diagnostics(trap, {0.0}, eps, 1);
    CHECK(onz[0].theta_rate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(onz[0].xi_rate) <= 1e-12);
    CHECK(onz[0].formula_residual <= 1e-10);

    // k = 2 steepens the inner profile.
    SystemSpec trap2 = builtin("trap_chart", {{"eps", eps}, {"k", 2.0}});
    auto rows2 = trap_diagnostics(trap2, {0.01}, eps, 2);
    CHECK(rows2[0].dtheta_per_xi == doctest::Approx(1e8 - 1.0).epsilon(1e-9));
}

TEST_CASE("trap entry-exit: the central orbit is captured, an off-center one rotates") {
    const double eps = 0.1;
    SystemSpec trap = builtin("trap_chart", {{"eps", eps}, {"k", 1.0}});
    VectorFieldFn field = reeb_field(trap);
    IntegratorOptions opt;
    ScalarField crit = trap.sing->crit;
    opt.critical = [crit](const Vec& p) { return crit(p).v; };

    // Entering above Z: t' = 0 for the Reeb field of the chart, so cylinders
    // are invariant; an orbit inside the blend zone picks up unbounded twist
    // relative to its xi advance.
    Vec p0 = pt({0.02, -1.0, 0.0});
    OrbitTrace tr = integrate(field, p0, 0.0, 200.0, opt);
    const double dtheta = tr.back()[2] - p0[2];
    const double dxi = tr.back()[1] - p0[1];
    CHECK(std::abs(tr.back()[0] - p0[0]) < 1e-12); // cylinder invariance
    CHECK(dtheta / dxi == doctest::Approx(trap_fprime_value(0.02, eps, 1) - 1.0).epsilon(1e-6));

    // Outside the collar the flow is a pure xi translation: entry equals exit.
    Vec q0 = pt({0.15, -1.0, 0.3});
    OrbitTrace tq = integrate(field, q0, 0.0, 2.0, opt);
    CHECK(std::abs(tq.back()[2] - q0[2]) < 1e-10);
    CHECK(tq.back()[1] > q0[1]);
}

TEST_CASE("theta degeneracy is reported, not silently solved") {
    // u = 0 makes Theta = u d(beta) + beta ^ du vanish identically.
    const std::string doc = R"toml(
spec_version = 1
name = "theta-degenerate"

[[coordinates]]
name = "phi"
periodic = true
period = 6.283185307179586

[[coordinates]]
name = "h"

[[coordinates]]
name = "theta"
periodic = true
period = 6.283185307179586

[form]
critical = "sin(phi)"
m = 1
u = "0"
beta = "h*d(theta)"

[sampling]
lo = [0.0, -0.85, 0.0]
hi = [6.283185307179586, 0.85, 6.283185307179586]
)toml";
    SystemSpec sys = compile_system(parse_system_text(doc));
    Vec p(3);
    p << 0.0, 0.4, 1.0;
    CHECK_THROWS_AS(reeb_on_Z(sys, p), DegenerateThetaError);
}

TEST_CASE("non-convex even-order forms refuse to desingularize") {
    // beta varies across the collar: not almost convex in the collar sense.
    const std::string doc = R"toml(
spec_version = 1
name = "not-convex"

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
m = 2
u = "sin(phi)"
beta = "cos(phi)*(1+sin(x)^2)*d(y)"

[sampling]
lo = [0.0, 0.0, 0.0]
hi = [6.283185307179586, 6.283185307179586, 6.283185307179586]
)toml";
    SystemSpec sys = compile_system(parse_system_text(doc));
    CHECK_THROWS_AS(desingularize_even(sys, 0.1), NotAlmostConvexError);
}

TEST_CASE("d1 on Z without decomposition data raises SingularPointError") {
    const std::string doc = R"toml(
spec_version = 1
name = "ambient-only"

[[coordinates]]
name = "phi"
periodic = true
period = 6.283185307179586

[form]
critical = "sin(phi)"
m = 1
ambient = "d(phi)/sin(phi)^1"

[sampling]
lo = [0.0]
hi = [6.283185307179586]
)toml";
    SystemSpec sys = compile_system(parse_system_text(doc));
    Vec p(1);
    p << 0.0;
    CHECK_THROWS_AS(d_alpha(sys, p), SingularPointError);
    p << 1e-10;
    CHECK_THROWS_AS(d_alpha(sys, p), NearCriticalError);
}
