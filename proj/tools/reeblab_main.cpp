#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reeblab/config.hpp"
#include "reeblab/errors.hpp"
#include "reeblab/flow.hpp"
#include "reeblab/gallery.hpp"
#include "reeblab/hunt.hpp"
#include "reeblab/reeb.hpp"
#include "reeblab/verify.hpp"

using json = nlohmann::json;
using namespace reeblab;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 42;
    double tol = 1e-10;
    std::string out;
    std::string format = "json";
};

// No partial files: write next to the target, then rename.
void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw Error("cannot open '" + tmp + "' for writing");
        f << content;
        if (!f) throw Error("short write to '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

void emit(const GlobalOpts& g, const std::string& content) {
    if (g.out.empty()) std::cout << content;
    else write_atomic(g.out, content);
}

std::map<std::string, double> collect_params(const CLI::App* cmd) {
    std::map<std::string, double> params;
    for (const char* key : {"m", "mu", "eps", "k"}) {
        const CLI::Option* o = cmd->get_option_no_throw(std::string("--") + key);
        if (o && o->count()) params[key] = std::stod(o->results().front());
    }
    const CLI::Option* o = cmd->get_option_no_throw("--energy");
    if (o && o->count()) params["c"] = std::stod(o->results().front());
    return params;
}

std::vector<double> parse_list(const std::string& text,
                               const std::map<std::string, double>& params) {
    return parse_point(text, params);
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

std::string trace_csv(const SystemSpec& sys, const OrbitTrace& tr) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "t";
    for (const auto& c : sys.coords) ss << "," << c.name;
    ss << ",step\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        ss << tr.times[i];
        for (int j = 0; j < sys.dim(); ++j) ss << "," << tr.states[i][j];
        ss << "," << (i == 0 ? 0.0 : tr.steps[i - 1]) << "\n";
    }
    return ss.str();
}

json trace_json(const SystemSpec& sys, const OrbitTrace& tr) {
    json j;
    j["system"] = sys.name;
    j["termination"] = termination_name(tr.reason);
    if (!tr.detail.empty()) j["detail"] = tr.detail;
    j["rejected_steps"] = tr.rejected;
    json cols = json::array();
    for (const auto& c : sys.coords) cols.push_back(c.name);
    j["coordinates"] = cols;
    json rows = json::array();
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        json r;
        r["t"] = tr.times[i];
        r["state"] = vec_json(tr.states[i]);
        rows.push_back(std::move(r));
    }
    j["trace"] = std::move(rows);
    return j;
}

VectorFieldFn pick_field(const SystemSpec& sys, const std::string& which, const Vec& p0) {
    if (which == "hamiltonian") return hamiltonian_field(sys);
    if (which == "reeb") return reeb_field(sys);
    if (which == "reeb-on-z") return reeb_field_on_Z(sys);
    // auto
    if (sys.sing && std::abs(sys.sing->crit(p0).v) <= 1e-10 && sys.sing->u)
        return reeb_field_on_Z(sys);
    if (sys.ham && !sys.is_level_set()) return hamiltonian_field(sys);
    if (!sys.alpha.empty() || sys.sing) return reeb_field(sys);
    if (sys.ham) return hamiltonian_field(sys);
    throw Error(sys.name + ": no flowable field");
}

int cmd_verify(const GlobalOpts& g, const std::string& ref,
               const std::map<std::string, double>& params, int samples) {
    SystemSpec sys = resolve_system(ref, params);
    VerificationReport rep = run_battery(sys, g.seed, samples, std::max(200, samples / 5));
    emit(g, report_to_json(rep, true));
    for (const CheckEntry& e : rep.checks)
        std::cerr << (e.pass ? "  pass  " : (e.informational ? "  info  " : "  FAIL  ")) << e.id
                  << "  worst=" << e.worst << " tol=" << e.tol
                  << (e.note.empty() ? "" : "  (" + e.note + ")") << "\n";
    std::cerr << (rep.overall ? "overall: pass" : "overall: FAIL") << "\n";
    return rep.overall ? 0 : 1;
}

int cmd_flow(const GlobalOpts& g, const std::string& ref,
             const std::map<std::string, double>& params, const std::string& from, double time,
             const std::string& field_kind) {
    SystemSpec sys = resolve_system(ref, params);
    const std::vector<double> pt = parse_list(from, sys.params);
    if (static_cast<int>(pt.size()) != sys.dim())
        throw ValidationError("start point needs " + std::to_string(sys.dim()) + " components",
                              "--from");
    Vec p0 = Eigen::Map<const Vec>(pt.data(), static_cast<Eigen::Index>(pt.size()));

    VectorFieldFn field = pick_field(sys, field_kind, p0);
    IntegratorOptions opt;
    opt.rtol = g.tol;
    opt.atol = g.tol * 1e-2;
    const bool on_z_flow = sys.sing && std::abs(sys.sing->crit(p0).v) <= 1e-10;
    if (sys.sing && !on_z_flow) {
        ScalarField crit = sys.sing->crit;
        opt.critical = [crit](const Vec& x) { return crit(x).v; };
    }

    OrbitTrace tr;
    try {
        tr = integrate(field, p0, 0.0, time, opt);
    } catch (const StepFailureError& e) {
        std::cerr << "step failure: " << e.what() << "\n";
        return 1;
    }

    std::cerr << "termination: " << termination_name(tr.reason) << " at t = " << tr.t_back()
              << "\n";
    json meta;
    for (const auto& [name, f] : sys.conserved) {
        const double drift = conservation_drift(tr, f);
        std::cerr << "conserved " << name << ": drift = " << drift << "\n";
        meta["drift_" + name] = drift;
    }

    if (g.format == "csv") {
        emit(g, trace_csv(sys, tr));
    } else {
        json j = trace_json(sys, tr);
        j["conservation"] = meta;
        emit(g, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_hunt(const GlobalOpts& g, const std::string& ref,
             const std::map<std::string, double>& params, const std::string& mode,
             const std::string& pr_list, const std::string& from, int grid, double tmax) {
    SystemSpec sys = resolve_system(ref, params);
    json out;
    out["system"] = sys.name;
    out["mode"] = mode;
    out["seed"] = g.seed;

    if (mode == "fixed") {
        if (!sys.z_seed_grid) throw ValidationError("system has no Z seed grid", "fixed");
        ZeroFindings zf = find_zeros_on_Z(sys, sys.z_seed_grid(grid));
        json iso = json::array();
        for (const Vec& p : zf.isolated) iso.push_back(vec_json(p));
        json fams = json::array();
        for (const ZeroFamily& f : zf.families) {
            json jf;
            jf["representative"] = vec_json(f.representative);
            jf["extent"] = f.extent;
            jf["members"] = static_cast<long>(f.members.size());
            fams.push_back(std::move(jf));
        }
        out["isolated"] = std::move(iso);
        out["families"] = std::move(fams);
        out["degenerate_family"] = zf.degenerate_family;
    } else if (mode == "periodic") {
        std::vector<Vec> seeds;
        if (!pr_list.empty()) {
            const double c = sys.params.count("c") ? sys.params.at("c")
                                                   : (sys.ham && sys.ham->c ? *sys.ham->c : 1.0);
            for (double pr : parse_list(pr_list, sys.params))
                seeds.push_back(infinity_cylinder_point(0.0, pr, c));
        } else if (!from.empty()) {
            const std::vector<double> pt = parse_list(from, sys.params);
            seeds.push_back(Eigen::Map<const Vec>(pt.data(), static_cast<Eigen::Index>(pt.size())));
        } else if (sys.z_seed_grid) {
            for (const Vec& p : sys.z_seed_grid(grid)) seeds.push_back(p);
        } else {
            throw ValidationError("periodic mode needs --pr, --from or a Z seed grid", "periodic");
        }
        json recs = json::array();
        for (const Vec& seed : seeds) {
            json r;
            r["seed"] = vec_json(seed);
            try {
                const bool on_z = sys.sing && std::abs(sys.sing->crit(seed).v) < 1e-6;
                PeriodicOrbitRecord rec = refine_periodic_auto(sys, seed, tmax / 3.0, on_z);
                r["found"] = true;
                r["representative"] = vec_json(rec.representative);
                r["period"] = rec.period;
                r["closure_residual"] = rec.closure_residual;
                r["newton_iterations"] = rec.newton_iterations;
                r["on_z"] = rec.on_z;
            } catch (const Error& e) {
                r["found"] = false;
                r["reason"] = e.what();
            }
            recs.push_back(std::move(r));
        }
        out["records"] = std::move(recs);
    } else if (mode == "singular") {
        if (from.empty()) throw ValidationError("singular mode needs --from", "singular");
        const std::vector<double> pt = parse_list(from, sys.params);
        Vec p0 = Eigen::Map<const Vec>(pt.data(), static_cast<Eigen::Index>(pt.size()));
        try {
            SingularOrbitRecord rec = detect_singular_orbit(sys, p0, tmax);
            json r;
            r["verdict"] = "confirmed";
            r["seed"] = vec_json(rec.seed);
            r["p_plus"] = vec_json(rec.p_plus);
            r["p_minus"] = vec_json(rec.p_minus);
            r["final_distance_plus"] = rec.final_distance_plus;
            r["final_distance_minus"] = rec.final_distance_minus;
            r["field_norm_plus"] = rec.field_norm_plus;
            r["field_norm_minus"] = rec.field_norm_minus;
            out["record"] = std::move(r);
        } catch (const InconclusiveError& e) {
            out["record"] = {{"verdict", "inconclusive"}, {"reason", e.what()}};
        }
    } else {
        throw ValidationError("mode must be fixed|periodic|singular", "mode");
    }
    emit(g, out.dump(2) + "\n");
    return 0;
}

int cmd_trap(const GlobalOpts& g, double eps, int k, const std::string& grid_list) {
    SystemSpec trap = builtin("trap_chart", {{"eps", eps}, {"k", static_cast<double>(k)}});
    std::vector<double> ts;
    if (grid_list.empty()) ts = {0.01, 0.05, 0.2};
    else ts = parse_list(grid_list, trap.params);
    const std::vector<TrapRow> rows = trap_diagnostics(trap, ts, eps, k);

    std::ostringstream csv;
    csv.precision(17);
    csv << "t,theta_rate,xi_rate,dtheta_per_unit_xi,expected_fprime_minus_1,formula_residual\n";
    double worst = 0.0, max_dtheta = 0.0, blowup_at = 0.0;
    bool violated = false;
    for (const TrapRow& r : rows) {
        csv << r.t << "," << r.theta_rate << "," << r.xi_rate << "," << r.dtheta_per_xi << ","
            << r.expected << "," << r.formula_residual << "\n";
        worst = std::max(worst, r.formula_residual);
        if (std::isfinite(r.expected) && std::abs(r.expected) > 1e-12) violated = true;
        if (std::isfinite(r.dtheta_per_xi) && std::abs(r.dtheta_per_xi) > max_dtheta) {
            max_dtheta = std::abs(r.dtheta_per_xi);
            blowup_at = r.t;
        }
    }
    emit(g, csv.str());
    std::cerr << (violated ? "entry-exit violated" : "entry-exit holds on this grid")
              << "; max |dtheta per unit xi| = " << max_dtheta << " at t = " << blowup_at
              << " (grows without bound as t -> 0+); worst formula residual = " << worst << "\n";
    return 0;
}

int cmd_desingularize(const GlobalOpts& g, const std::string& ref,
                      const std::map<std::string, double>& params, double eps) {
    SystemSpec sys = resolve_system(ref, params);
    json out;
    out["system"] = sys.name;
    out["eps"] = eps;

    SystemSpec smooth = desingularize_even(sys, eps);
    Rng rng(g.seed);
    double agree = 0.0;
    int outside = 0;
    for (int i = 0; i < 500 && outside < 100; ++i) {
        Vec p = sys.off_z_sampler(rng);
        if (std::abs(sys.sing->crit(p).v) < eps) continue;
        const Vec a = reeb_off_Z(sys, p).vector;
        const Vec b = reeb_off_Z(smooth, p).vector;
        agree = std::max(agree, (a - b).cwiseAbs().maxCoeff());
        ++outside;
    }
    out["outside_collar_samples"] = outside;
    out["max_reeb_difference_outside"] = agree;

    double fp_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i)
        fp_min = std::min(fp_min, desing_fprime(sys.sing->m, eps, -1.5 * eps + 3.0 * eps * i / 1000.0));
    out["fprime_min"] = fp_min;

    json sweep = json::array();
    for (double e : {eps, eps / 2, eps / 4}) {
        SystemSpec sm = desingularize_even(sys, e);
        double sup = 0.0;
        int used = 0;
        Rng rng2(g.seed ^ 0x77);
        for (int i = 0; i < 4000 && used < 200; ++i) {
            Vec p = sys.off_z_sampler(rng2);
            const double z = std::abs(sys.sing->crit(p).v);
            if (z < 2e-3 || z > eps / 8) continue;
            const Vec a = reeb_off_Z(sys, p).vector;
            const Vec b = reeb_off_Z(sm, p).vector;
            sup = std::max(sup, (a - b).norm());
            ++used;
        }
        sweep.push_back({{"eps", e}, {"sup_reeb_difference_annulus", sup}, {"samples", used}});
    }
    out["collar_sweep"] = std::move(sweep);
    emit(g, out.dump(2) + "\n");
    return 0;
}

int cmd_transform_check(const GlobalOpts& g, double mu, int samples) {
    TransformSpec pol = polar_transform();
    TransformSpec mcg = mcgehee_transform();
    Rng rng(g.seed);

    double rt = 0.0, pb_pol = 0.0, pb_mcg = 0.0, dh = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double r = rng.uniform(1.0, 3.0);
        const double th = rng.uniform(0.0, 6.283185307179586);
        Vec cart(4);
        cart << r * std::cos(th), r * std::sin(th), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);

        const Vec polp = pol.forward(cart);
        const Vec mcgp = mcg.forward(polp);
        rt = std::max(rt, (pol.inverse(mcg.inverse(mcgp)) - cart).cwiseAbs().maxCoeff());
        pb_pol = std::max(pb_pol, pullback_residual(pol, cart));
        pb_mcg = std::max(pb_mcg, pullback_residual(mcg, polp));
        dh = std::max(dh, std::abs(rpc3bp_hamiltonian("polar", polp, mu) -
                                   rpc3bp_hamiltonian("cartesian", cart, mu)));
    }
    json out;
    out["samples"] = samples;
    out["mu"] = mu;
    out["roundtrip_max"] = rt;
    out["pullback_residual_polar"] = pb_pol;
    out["pullback_residual_mcgehee"] = pb_mcg;
    out["hamiltonian_consistency"] = dh;
    const bool pass = rt <= 1e-12 && pb_pol <= 1e-9 && pb_mcg <= 1e-9 && dh <= 1e-11;
    out["overall"] = pass ? "pass" : "fail";
    emit(g, out.dump(2) + "\n");
    return pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reeblab: numerical b^m-contact dynamics"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--tol", g.tol, "integration tolerance");
    app.add_option("--out", g.out, "output file (atomic write)");
    app.add_option("--format", g.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));

    auto add_params = [](CLI::App* cmd) {
        cmd->add_option("--m", "singularity order");
        cmd->add_option("--mu", "mass ratio");
        cmd->add_option("--energy", "level-set energy c");
        cmd->add_option("--eps", "collar width");
        cmd->add_option("--k", "half order");
    };

    std::string ref, from, field_kind = "auto", mode, pr_list, grid_list;
    double time_span = 1.0, eps = 0.1, tmax = 40.0, mu = 0.0122771;
    int samples = 1000, grid = 12, k = 1;

    CLI::App* verify = app.add_subcommand("verify", "run the structural verification battery");
    verify->add_option("system", ref)->required();
    verify->add_option("--samples", samples, "off-Z sample count");
    add_params(verify);

    CLI::App* flow = app.add_subcommand("flow", "integrate a field and export the trace");
    flow->add_option("system", ref)->required();
    flow->add_option("--from", from, "start point (expression list)")->required();
    flow->add_option("--time", time_span)->required();
    flow->add_option("--field", field_kind, "auto|reeb|hamiltonian|reeb-on-z");
    add_params(flow);

    CLI::App* hunt = app.add_subcommand("hunt", "fixed points, periodic and singular orbits");
    hunt->add_option("system", ref)->required();
    hunt->add_option("mode", mode, "fixed|periodic|singular")->required();
    hunt->add_option("--pr", pr_list, "P_r seed list for the infinity cylinder");
    hunt->add_option("--from", from, "seed point");
    hunt->add_option("--grid", grid, "seed grid resolution");
    hunt->add_option("--tmax", tmax, "integration budget");
    add_params(hunt);

    CLI::App* trap = app.add_subcommand("trap", "trap-chart entry-exit diagnostics");
    trap->add_option("--eps", eps);
    trap->add_option("--k", k);
    trap->add_option("--grid", grid_list, "t values");

    CLI::App* desing = app.add_subcommand("desingularize", "even-order desingularization report");
    desing->add_option("system", ref)->required();
    add_params(desing); // --eps is the collar width here and is required


    CLI::App* tcheck = app.add_subcommand("transform-check", "coordinate pipeline canonicity");
    tcheck->add_option("--mu", mu);
    tcheck->add_option("--samples", samples);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) return cmd_verify(g, ref, collect_params(verify), samples);
        if (flow->parsed())
            return cmd_flow(g, ref, collect_params(flow), from, time_span, field_kind);
        if (hunt->parsed())
            return cmd_hunt(g, ref, collect_params(hunt), mode, pr_list, from, grid, tmax);
        if (trap->parsed()) return cmd_trap(g, eps, k, grid_list);
        if (desing->parsed()) {
            auto params = collect_params(desing);
            if (!params.count("eps")) throw ParamError("desingularize needs --eps");
            const double e = params.at("eps");
            params.erase("eps"); // collar width, not a system parameter
            return cmd_desingularize(g, ref, params, e);
        }
        if (tcheck->parsed()) return cmd_transform_check(g, mu, samples == 1000 ? 100 : samples);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownSystemError& e) {
        std::cerr << "unknown system: " << e.what() << "\n";
        return 2;
    } catch (const ParamError& e) {
        std::cerr << "bad parameter: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
