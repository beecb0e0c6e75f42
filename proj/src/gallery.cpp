#include "reeblab/gallery.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "reeblab/config.hpp"
#include "reeblab/errors.hpp"

namespace reeblab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

int get_int_param(const std::map<std::string, double>& params, const std::string& key,
                  int fallback) {
    const double v = get_param(params, key, fallback);
    if (v != std::floor(v)) throw ParamError(key + " must be an integer");
    return static_cast<int>(v);
}

SystemDoc::CoordDoc coord(const std::string& name, bool periodic = false, double period = 0.0) {
    return {name, periodic, period};
}

// --- RPC3BP charts ----------------------------------------------------------

std::string cartesian_h_text() {
    return "(p1^2+p2^2)/2 - (1-mu)/sqrt((q1-mu)^2+q2^2) - "
           "mu/sqrt((q1+1-mu)^2+q2^2) + p1*q2 - p2*q1";
}

std::string polar_h_text() {
    return "(P_r^2+(P_alpha/r)^2)/2 - (1-mu)/sqrt(r^2-2*mu*r*cos(theta)+mu^2) - "
           "mu/sqrt(r^2+2*(1-mu)*r*cos(theta)+(1-mu)^2) - P_alpha";
}

std::string mcgehee_h_text() {
    return "P_r^2/2 + x^4*P_alpha^2/8 - (1-mu)*x^2/sqrt(4-4*mu*x^2*cos(theta)+mu^2*x^4) - "
           "mu*x^2/sqrt(4+4*(1-mu)*x^2*cos(theta)+(1-mu)^2*x^4) - P_alpha";
}

BoundExpr cartesian_h_bound(double mu) {
    // Parameters fold into constants at bind time, so the table is temporary.
    auto ast = std::make_shared<const Ast>(parse_expr(cartesian_h_text()));
    std::map<std::string, double> params{{"mu", mu}};
    Bindings b;
    b.coords = {"q1", "q2", "p1", "p2"};
    b.params = &params;
    return BoundExpr(ast, b);
}

// Cartesian variables as jets of the polar chart.
std::vector<Jet2> polar_to_cartesian_jets(const Jet2& r, const Jet2& th, const Jet2& pr,
                                          const Jet2& pa) {
    Jet2 c = cos(th), s = sin(th);
    std::vector<Jet2> v;
    v.push_back(r * c);
    v.push_back(r * s);
    v.push_back(pr * c - (pa / r) * s);
    v.push_back(pr * s + (pa / r) * c);
    return v;
}

ScalarField polar_h_composed(double mu) {
    BoundExpr hc = cartesian_h_bound(mu);
    return [hc](const Vec& p) -> Jet2 {
        if (p[0] <= 0.0) throw DomainError("r must be positive");
        Jet2 r = Jet2::variable(p[0], 0, 4);
        Jet2 th = Jet2::variable(p[1], 1, 4);
        Jet2 pr = Jet2::variable(p[2], 2, 4);
        Jet2 pa = Jet2::variable(p[3], 3, 4);
        return hc.jet(polar_to_cartesian_jets(r, th, pr, pa));
    };
}

Jet2 mcgehee_infinity_h(const Vec& p) {
    // H|_Z = P_r^2/2 - P_alpha, smooth extension with the correct first
    // derivatives at x = 0.
    Jet2 pr = Jet2::variable(p[2], 2, 4);
    Jet2 pa = Jet2::variable(p[3], 3, 4);
    return pr * pr * 0.5 - pa;
}

ScalarField mcgehee_h_composed(double mu) {
    BoundExpr hc = cartesian_h_bound(mu);
    // r = 2/x^2 is even in x, so the composition extends smoothly across the
    // infinity set; collar sweeps sample both signs of x.
    return [hc](const Vec& p) -> Jet2 {
        if (std::abs(p[0]) <= kZMin) return mcgehee_infinity_h(p);
        Jet2 x = Jet2::variable(p[0], 0, 4);
        Jet2 th = Jet2::variable(p[1], 1, 4);
        Jet2 pr = Jet2::variable(p[2], 2, 4);
        Jet2 pa = Jet2::variable(p[3], 3, 4);
        Jet2 r = 2.0 * powi(x, -2);
        return hc.jet(polar_to_cartesian_jets(r, th, pr, pa));
    };
}

double primary_distance_sq(const Vec& cart, double mu, int which) {
    const double ax = which == 0 ? mu : -(1.0 - mu);
    const double dx = cart[0] - ax, dy = cart[1];
    return dx * dx + dy * dy;
}

// --- gallery documents -------------------------------------------------------

SystemDoc gallery_doc(const std::string& name, const std::map<std::string, double>& params) {
    SystemDoc d;
    d.name = name;

    if (name == "s1_b") {
        d.coordinates = {coord("phi", true, kTwoPi)};
        d.critical = "sin(phi)";
        d.m = 1;
        d.u = "1";
        d.ambient = "d(phi)/sin(phi)^1";
        d.lo = {0.0};
        d.hi = {kTwoPi};
        return d;
    }

    if (name == "t3_bm") {
        const int m = get_int_param(params, "m", 1);
        if (m < 1) throw ParamError("t3_bm: m must be >= 1");
        d.coordinates = {coord("x", true, kTwoPi), coord("y", true, kTwoPi),
                         coord("phi", true, kTwoPi)};
        d.critical = "sin(x)";
        d.m = m;
        d.u = "sin(phi)";
        d.beta = "cos(phi)*d(y)";
        d.ambient = "sin(phi)*d(x)/sin(x)^" + std::to_string(m) + " + cos(phi)*d(y)";
        d.witness = {"log(abs(tan(x/2)))"};
        d.witness_rate = {m == 1 ? std::string("sin(phi)")
                                 : "sin(phi)*sin(x)^" + std::to_string(m - 1)};
        d.lo = {0.0, 0.0, 0.0};
        d.hi = {kTwoPi, kTwoPi, kTwoPi};
        return d;
    }

    if (name == "s3_b") {
        d.coordinates = {coord("x1"), coord("y1"), coord("x2"), coord("y2")};
        d.critical = "x1";
        d.m = 1;
        d.u = "-y1";
        d.beta = "1/2*d(y1) + 1/2*x2*d(y2) - 1/2*y2*d(x2)";
        d.h = "x1^2+y1^2+x2^2+y2^2";
        d.omega = "1/x1*d(x1)^d(y1) + d(x2)^d(y2)";
        d.liouville = {"1/2*x1", "y1", "1/2*x2", "1/2*y2"};
        d.energy = 1.0;
        d.witness = {"y1"};
        d.lo = {-1.0, -1.0, -1.0, -1.0};
        d.hi = {1.0, 1.0, 1.0, 1.0};
        return d;
    }

    if (name == "s2s1") {
        d.coordinates = {coord("phi", true, kTwoPi), coord("h"), coord("theta", true, kTwoPi)};
        d.critical = "sin(phi)";
        d.m = 1;
        d.u = "1";
        d.beta = "h*d(theta)";
        d.ambient = "d(phi)/sin(phi)^1 + h*d(theta)";
        d.lo = {0.0, -0.85, 0.0};
        d.hi = {kTwoPi, 0.85, kTwoPi};
        return d;
    }

    if (name == "trap_chart") {
        const double eps = get_param(params, "eps", 0.1);
        const int k = get_int_param(params, "k", 1);
        if (eps <= 0.0) throw ParamError("trap_chart: eps must be positive");
        if (k < 1) throw ParamError("trap_chart: k must be >= 1");
        d.coordinates = {coord("t"), coord("xi"), coord("theta", true, kTwoPi)};
        d.parameters["eps"] = eps;
        d.parameters["k"] = k;
        d.critical = "t";
        d.m = 2 * k;
        d.u = "2*xi*exp(2*t)";
        d.beta = "exp(2*t)*d(xi) + exp(2*t)*d(theta)";
        // The file-corpus chart covers the inner zone where f_eps' = 1/t^2k
        // exactly; the builtin patches in the blended profile outside it.
        d.ambient = "2*xi*exp(2*t)*d(t)/t^" + std::to_string(2 * k) +
                    " + exp(2*t)*d(xi) + exp(2*t)*d(theta)";
        d.valid_halfwidth = eps / 2;
        d.lo = {-1.5 * eps, -2.0, 0.0};
        d.hi = {1.5 * eps, 2.0, kTwoPi};
        return d;
    }

    const bool cart = name == "rpc3bp_cartesian";
    const bool polar = name == "rpc3bp_polar";
    const bool mcgehee = name == "rpc3bp_mcgehee" || name == "rpc3bp_infinity_cylinder";
    if (cart || polar || mcgehee) {
        const double mu = get_param(params, "mu", 0.0122771);
        if (mu < 0.0 || mu > 0.5) throw ParamError("mu must lie in [0, 1/2]");
        d.parameters["mu"] = mu;
        const bool has_c = params.count("c") || mcgehee;
        const double c = get_param(params, "c", 1.0);
        if (mcgehee && c <= 0.0) throw ParamError("the infinity set needs c > 0");

        if (cart) {
            d.coordinates = {coord("q1"), coord("q2"), coord("p1"), coord("p2")};
            d.h = cartesian_h_text();
            d.omega = "d(q1)^d(p1) + d(q2)^d(p2)";
            d.liouville = {"0", "0", "p1", "p2"};
            d.lo = {-2.5, -2.5, -3.0, -3.0};
            d.hi = {2.5, 2.5, 3.0, 3.0};
        } else if (polar) {
            d.coordinates = {coord("r"), coord("theta", true, kTwoPi), coord("P_r"),
                             coord("P_alpha")};
            d.h = polar_h_text();
            d.omega = "d(r)^d(P_r) + d(theta)^d(P_alpha)";
            d.liouville = {"0", "0", "P_r", "P_alpha"};
            d.lo = {1.2, 0.0, -1.5, -2.0};
            d.hi = {3.0, kTwoPi, 1.5, 2.0};
        } else {
            d.coordinates = {coord("x"), coord("theta", true, kTwoPi), coord("P_r"),
                             coord("P_alpha")};
            d.h = mcgehee_h_text();
            d.omega = "-4/x^3*d(x)^d(P_r) + d(theta)^d(P_alpha)";
            d.liouville = {"0", "0", "P_r", "P_alpha"};
            d.critical = "x";
            d.m = 3;
            d.u = "4*P_r";
            d.beta = "-P_alpha*d(theta)";
            d.lo = {0.45, 0.0, -2.0, -2.5};
            d.hi = {1.2, kTwoPi, 2.0, 2.5};
        }
        if (has_c) d.energy = c;
        return d;
    }

    throw UnknownSystemError("unknown system '" + name + "'");
}

// Quintic smoothstep: zero first and second derivatives at both ends.
Jet2 smoothstep5(const Jet2& u) {
    Jet2 u2 = u * u;
    Jet2 u3 = u2 * u;
    return u3 * (6.0 * u2 - 15.0 * u + 10.0);
}

// f_eps'(t) as a jet: 1/t^2k inside |t| <= eps/2, 1 outside |t| >= eps,
// convex blend between (C^2 seams, positive everywhere).
Jet2 trap_fprime_jet(const Jet2& t, double eps, int k) {
    const double at = std::abs(t.v);
    if (at <= 0.5 * eps) return powi(t, -2 * k);
    if (at >= eps) return Jet2::constant(1.0, t.dim());
    Jet2 a = t.v > 0 ? t : -t;
    Jet2 s = smoothstep5((a - 0.5 * eps) * (2.0 / eps));
    return (Jet2::constant(1.0, t.dim()) - s) * powi(t, -2 * k) + s;
}

void patch_trap_ambient(SystemSpec& sys, double eps, int k) {
    sys.alpha.dim = 3;
    sys.alpha.coef.assign(3, CoefField());
    sys.alpha.coef[0] = [eps, k](const Vec& p) -> Jet1 {
        Jet2 t = Jet2::variable(p[0], 0, 3);
        Jet2 xi = Jet2::variable(p[1], 1, 3);
        return (2.0 * xi * exp(2.0 * t) * trap_fprime_jet(t, eps, k)).jet1();
    };
    sys.alpha.coef[1] = [](const Vec& p) -> Jet1 {
        Jet2 t = Jet2::variable(p[0], 0, 3);
        return exp(2.0 * t).jet1();
    };
    sys.alpha.coef[2] = sys.alpha.coef[1];
}

SystemSpec build_symplectization(const std::string& inner_name,
                                 const std::map<std::string, double>& params) {
    SystemSpec inner = builtin(inner_name, params);
    const int n = inner.dim();

    SystemSpec sys;
    sys.name = "symplectization(" + inner.name + ")";
    sys.coords = inner.coords;
    sys.coords.push_back({"s", false, 0.0});
    sys.params = inner.params;
    sys.spec_hash = hash_string(sys.name, inner.spec_hash);

    HamiltonianData ham;
    ham.h = [n](const Vec& p) {
        Jet2 s = Jet2::variable(p[n], n, n + 1);
        return exp(s);
    };

    // Omega~ = e^s (ds ^ alpha + d alpha).  Only the values (and the
    // s-derivative) are exact; the M-gradients of the d(alpha) block are not
    // provided and nothing downstream reads them.
    TwoFormField w;
    w.dim = n + 1;
    w.comp.resize(static_cast<std::size_t>(FormValue::choose(n + 1, 2)));
    FormValue proto(2, n + 1);
    SystemSpec inner_copy = inner;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            int idx[2] = {i, j};
            const std::size_t rank = proto.rank(idx, 2);
            if (j == n) {
                w.comp[rank] = [inner_copy, i, n](const Vec& p) -> Jet1 {
                    const Vec pm = p.head(n);
                    const double es = std::exp(p[n]);
                    const FormValue av = alpha_value(inner_copy, pm);
                    Jet1 out = Jet1::constant(0.0, n + 1);
                    out.v = -es * av[static_cast<std::size_t>(i)];
                    out.g[n] = out.v;
                    return out;
                };
            } else {
                w.comp[rank] = [inner_copy, i, j, n](const Vec& p) -> Jet1 {
                    const Vec pm = p.head(n);
                    const double es = std::exp(p[n]);
                    const FormValue dav = d_alpha(inner_copy, pm);
                    int id[2] = {i, j};
                    Jet1 out = Jet1::constant(0.0, n + 1);
                    out.v = es * dav[dav.rank(id, 2)];
                    out.g[n] = out.v;
                    return out;
                };
            }
        }
    }
    ham.omega = std::move(w);
    sys.ham = std::move(ham);
    sys.conserved.emplace_back("H", sys.ham->h);

    sys.sample_lo = Vec(n + 1);
    sys.sample_hi = Vec(n + 1);
    sys.sample_lo.head(n) = inner.sample_lo;
    sys.sample_hi.head(n) = inner.sample_hi;
    sys.sample_lo[n] = -0.5;
    sys.sample_hi[n] = 0.5;
    if (inner.off_z_sampler) {
        auto inner_sampler = inner.off_z_sampler;
        sys.off_z_sampler = [inner_sampler, n](Rng& rng) {
            Vec p(n + 1);
            p.head(n) = inner_sampler(rng);
            p[n] = rng.uniform(-0.5, 0.5);
            return p;
        };
    }
    return sys;
}

} // namespace

SystemSpec builtin(const std::string& name, const std::map<std::string, double>& params) {
    if (name.rfind("symplectization", 0) == 0) {
        std::string inner = "t3_bm";
        const auto open = name.find('(');
        if (open != std::string::npos) {
            const auto close = name.find(')', open);
            if (close == std::string::npos) throw UnknownSystemError("expected ')' in " + name);
            inner = name.substr(open + 1, close - open - 1);
        }
        return build_symplectization(inner, params);
    }

    SystemSpec sys = compile_system(gallery_doc(name, params));

    if (name == "t3_bm" || name == "s2s1" || name == "s1_b") sys.expect_r_plus_invariant = true;
    if (name == "t3_bm" || name == "s3_b") sys.expect_u_nonconstant = true;
    if (name == "s2s1") sys.expect_zero_reeb_on_Z = true;

    if (name == "s3_b") {
        // Exact sphere samplers.
        sys.off_z_sampler = [](Rng& rng) {
            while (true) {
                Vec p(4);
                for (int i = 0; i < 4; ++i) p[i] = rng.uniform(-1.0, 1.0);
                const double nn = p.norm();
                if (nn < 0.2) continue;
                p /= nn;
                if (std::abs(p[0]) < 0.05) continue;
                return p;
            }
        };
        sys.on_z_sampler = [](Rng& rng) {
            while (true) {
                Vec q(3);
                for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-1.0, 1.0);
                const double nn = q.norm();
                if (nn < 0.2) continue;
                Vec p(4);
                p << 0.0, q[0] / nn, q[1] / nn, q[2] / nn;
                return p;
            }
        };
        sys.z_seed_grid = [](int n_side) {
            std::vector<Vec> seeds;
            for (int i = 0; i < n_side; ++i) {
                // Fibonacci-ish sphere covering of Z = S^2 in (y1, x2, y2).
                const double y1 = -1.0 + 2.0 * (i + 0.5) / n_side;
                const double rr = std::sqrt(std::max(0.0, 1.0 - y1 * y1));
                const double ang = 2.39996322972865332 * i;
                Vec p(4);
                p << 0.0, y1, rr * std::cos(ang), rr * std::sin(ang);
                seeds.push_back(p);
            }
            return seeds;
        };
    }

    if (name == "t3_bm") {
        sys.z_seed_grid = [](int n_side) {
            std::vector<Vec> seeds;
            for (int comp = 0; comp < 2; ++comp)
                for (int iy = 0; iy < n_side; ++iy)
                    for (int ip = 0; ip < n_side; ++ip) {
                        Vec p(3);
                        p << comp * kPi, kTwoPi * (iy + 0.5) / n_side,
                            kTwoPi * (ip + 0.25) / n_side;
                        seeds.push_back(p);
                    }
            return seeds;
        };
    }

    if (name == "s2s1") {
        sys.z_seed_grid = [](int n_side) {
            std::vector<Vec> seeds;
            for (int comp = 0; comp < 2; ++comp)
                for (int ih = 0; ih < n_side; ++ih)
                    for (int it = 0; it < n_side; ++it) {
                        Vec p(3);
                        p << comp * kPi, -0.8 + 1.6 * (ih + 0.5) / n_side,
                            kTwoPi * (it + 0.5) / n_side;
                        seeds.push_back(p);
                    }
            return seeds;
        };
    }

    if (name == "trap_chart") {
        const double eps = get_param(params, "eps", 0.1);
        const int k = get_int_param(params, "k", 1);
        patch_trap_ambient(sys, eps, k);
        sys.z_seed_grid = [](int n_side) {
            std::vector<Vec> seeds;
            for (int ix = 0; ix < n_side; ++ix)
                for (int it = 0; it < n_side; ++it) {
                    Vec p(3);
                    p << 0.0, -1.5 + 3.0 * (ix + 0.5) / n_side, kTwoPi * (it + 0.5) / n_side;
                    seeds.push_back(p);
                }
            return seeds;
        };
    }

    if (name.rfind("rpc3bp", 0) == 0) {
        const double mu = sys.params.at("mu");
        if (name == "rpc3bp_cartesian") {
            sys.sample_accept = [mu](const Vec& p) {
                return primary_distance_sq(p, mu, 0) > 0.09 && primary_distance_sq(p, mu, 1) > 0.09;
            };
            install_default_samplers(sys);
        }
        if (name == "rpc3bp_polar") {
            ScalarField h = polar_h_composed(mu);
            sys.ham->h = h;
            sys.conserved.clear();
            sys.conserved.emplace_back("H", h);
            install_default_samplers(sys);
        }
        if (name == "rpc3bp_mcgehee" || name == "rpc3bp_infinity_cylinder") {
            ScalarField h = mcgehee_h_composed(mu);
            sys.ham->h = h;
            sys.conserved.clear();
            sys.conserved.emplace_back("H", h);
            sys.expect_u_nonconstant = true;
            install_default_samplers(sys);
            const double c = *sys.ham->c;
            sys.on_z_sampler = [c](Rng& rng) {
                return infinity_cylinder_point(rng.uniform(0.0, kTwoPi), rng.uniform(-2.0, 2.0), c);
            };
            sys.z_seed_grid = [c](int n_side) {
                std::vector<Vec> seeds;
                for (int ip = 0; ip < n_side; ++ip)
                    for (int it = 0; it < n_side; ++it)
                        seeds.push_back(infinity_cylinder_point(kTwoPi * (it + 0.5) / n_side,
                                                                -1.8 + 3.6 * (ip + 0.5) / n_side, c));
                return seeds;
            };
        }
    }
    return sys;
}

std::vector<std::string> builtin_names() {
    return {"s1_b",          "t3_bm",        "s3_b",
            "s2s1",          "trap_chart",   "rpc3bp_cartesian",
            "rpc3bp_polar",  "rpc3bp_mcgehee", "rpc3bp_infinity_cylinder",
            "symplectization"};
}

SystemSpec resolve_system(const std::string& ref, const std::map<std::string, double>& params) {
    for (const std::string& n : builtin_names())
        if (ref == n || (n == "symplectization" && ref.rfind(n + "(", 0) == 0))
            return builtin(ref, params);
    if (std::filesystem::exists(ref)) return load_system_file(ref);
    throw UnknownSystemError("'" + ref + "' is neither a builtin nor a readable file");
}

// --- transforms ---------------------------------------------------------------

namespace {

TwoFormField canonical_form(const std::vector<std::string>& coords,
                            const std::string& text) {
    Bindings b;
    b.coords = coords;
    return compile_twoform(text, b, "transform");
}

} // namespace

TransformSpec polar_transform() {
    TransformSpec t;
    t.name = "cartesian_to_polar";
    t.source_coords = {"q1", "q2", "p1", "p2"};
    t.target_coords = {"r", "theta", "P_r", "P_alpha"};
    t.forward = [](const Vec& s) -> Vec {
        const double r = std::hypot(s[0], s[1]);
        if (r <= 0.0) throw DomainError("polar chart undefined at the origin");
        const double th = std::atan2(s[1], s[0]);
        Vec out(4);
        out << r, th, (s[0] * s[2] + s[1] * s[3]) / r, s[0] * s[3] - s[1] * s[2];
        return out;
    };
    t.inverse = [](const Vec& p) -> Vec {
        const double r = p[0], th = p[1], pr = p[2], pa = p[3];
        if (r <= 0.0) throw DomainError("r must be positive");
        const double c = std::cos(th), s = std::sin(th);
        Vec out(4);
        out << r * c, r * s, pr * c - pa / r * s, pr * s + pa / r * c;
        return out;
    };
    t.source_form = canonical_form(t.source_coords, "d(q1)^d(p1) + d(q2)^d(p2)");
    t.target_form = canonical_form(t.target_coords, "d(r)^d(P_r) + d(theta)^d(P_alpha)");
    return t;
}

TransformSpec mcgehee_transform() {
    TransformSpec t;
    t.name = "polar_to_mcgehee";
    t.source_coords = {"r", "theta", "P_r", "P_alpha"};
    t.target_coords = {"x", "theta", "P_r", "P_alpha"};
    t.forward = [](const Vec& p) -> Vec {
        if (p[0] <= 0.0) throw DomainError("r must be positive");
        Vec out = p;
        out[0] = std::sqrt(2.0 / p[0]);
        return out;
    };
    t.inverse = [](const Vec& m) -> Vec {
        if (m[0] <= 0.0) throw DomainError("x must be positive");
        Vec out = m;
        out[0] = 2.0 / (m[0] * m[0]);
        return out;
    };
    t.source_form = canonical_form(t.source_coords, "d(r)^d(P_r) + d(theta)^d(P_alpha)");
    t.target_form = canonical_form(t.target_coords, "-4/x^3*d(x)^d(P_r) + d(theta)^d(P_alpha)");
    return t;
}

Vec transform_point(const TransformSpec& t, const Vec& p, bool forward_direction) {
    return forward_direction ? t.forward(p) : t.inverse(p);
}

double pullback_residual(const TransformSpec& t, const Vec& source_point) {
    const int n = static_cast<int>(source_point.size());
    const double h = 1e-6;
    Mat jac(n, n);
    for (int j = 0; j < n; ++j) {
        Vec pp = source_point, pm = source_point;
        pp[j] += h;
        pm[j] -= h;
        jac.col(j) = (t.forward(pp) - t.forward(pm)) / (2.0 * h);
    }
    const Mat mt = t.target_form.matrix(t.forward(source_point));
    const Mat pulled = jac.transpose() * mt * jac;
    const Mat ms = t.source_form.matrix(source_point);
    return (pulled - ms).cwiseAbs().maxCoeff();
}

double rpc3bp_hamiltonian(const std::string& chart, const Vec& state, double mu) {
    if (mu < 0.0 || mu > 0.5) throw ParamError("mu must lie in [0, 1/2]");
    Vec cart;
    if (chart == "cartesian") {
        cart = state;
    } else if (chart == "polar") {
        cart = polar_transform().inverse(state);
    } else if (chart == "mcgehee") {
        if (std::abs(state[0]) <= kZMin) {
            return 0.5 * state[2] * state[2] - state[3];
        }
        if (state[0] < 0.0) throw DomainError("x must be positive off the infinity set");
        cart = polar_transform().inverse(mcgehee_transform().inverse(state));
    } else {
        throw ParamError("unknown chart '" + chart + "'");
    }
    if (primary_distance_sq(cart, mu, 0) < 1e-20 || primary_distance_sq(cart, mu, 1) < 1e-20)
        throw CollisionError("state collides with a primary");
    BoundExpr h = cartesian_h_bound(mu);
    return h.value(cart);
}

Vec infinity_cylinder_point(double theta, double pr, double c) {
    Vec p(4);
    p << 0.0, theta, pr, 0.5 * pr * pr - c;
    return p;
}

Vec rpc3bp_hyperbolic_seed(double mu, double c) {
    // q on the positive axis, momentum mostly radial-outward; scale it onto
    // H = c (quadratic in the scale).
    Vec q(2);
    q << 2.0, 0.0;
    Vec d(2);
    d << 1.0, 0.25;
    d.normalize();
    const double u_pot = (1.0 - mu) / std::sqrt(primary_distance_sq((Vec(4) << q[0], q[1], 0, 0).finished(), mu, 0)) +
                         mu / std::sqrt(primary_distance_sq((Vec(4) << q[0], q[1], 0, 0).finished(), mu, 1));
    const double a = 0.5;
    const double b = d[0] * q[1] - d[1] * q[0];
    const double c0 = -u_pot - c;
    const double disc = b * b - 4.0 * a * c0;
    const double s = (-b + std::sqrt(disc)) / (2.0 * a);
    Vec out(4);
    out << q[0], q[1], s * d[0], s * d[1];
    return out;
}

} // namespace reeblab
