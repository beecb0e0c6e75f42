#include "reeblab/verify.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "reeblab/errors.hpp"
#include "reeblab/reeb.hpp"

namespace reeblab {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned threads = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("REEBLAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) threads = static_cast<unsigned>(v);
    }
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct Battery {
    const SystemSpec& sys;
    std::uint64_t seed;
    VerificationReport rep;

    void add(CheckEntry e) {
        if (!e.informational && !e.pass) rep.overall = false;
        rep.checks.push_back(std::move(e));
    }

    std::vector<Vec> draw(const std::function<Vec(Rng&)>& sampler, int n,
                          std::uint64_t stream) const {
        std::vector<Vec> pts;
        pts.reserve(static_cast<std::size_t>(n));
        Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        for (int i = 0; i < n; ++i) pts.push_back(sampler(rng));
        return pts;
    }
};

bool has_on_z_machinery(const SystemSpec& sys) {
    if (!sys.sing || !sys.sing->u || !sys.on_z_sampler) return false;
    // Needs a 2-dimensional critical set.
    return sys.dim() - (sys.is_level_set() ? 1 : 0) == 3;
}

void reeb_residuals(Battery& b, int n_off) {
    if (b.sys.alpha.empty() && !b.sys.sing) return;
    if (!b.sys.off_z_sampler) return;
    auto pts = b.draw(b.sys.off_z_sampler, n_off, 1);
    std::vector<double> res_a(pts.size()), res_d(pts.size()), coeff(pts.size()),
        zsign(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        const ReebSolution sol = reeb_off_Z(b.sys, pts[i]);
        res_a[i] = sol.alpha_residual;
        res_d[i] = sol.dalpha_residual;
        coeff[i] = contact_coefficient(b.sys, pts[i]);
        zsign[i] = b.sys.sing ? (b.sys.sing->crit(pts[i]).v > 0 ? 1.0 : -1.0) : 1.0;
    });

    CheckEntry a{"reeb-alpha-residual", static_cast<long>(pts.size()), 0.0, 1e-9, true, false, ""};
    CheckEntry d{"reeb-dalpha-residual", static_cast<long>(pts.size()), 0.0, 1e-8, true, false, ""};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        a.worst = std::max(a.worst, res_a[i]);
        d.worst = std::max(d.worst, res_d[i]);
    }
    a.pass = a.worst <= a.tol;
    d.pass = d.worst <= d.tol;
    b.add(a);
    b.add(d);

    CheckEntry c{"contact-coefficient", static_cast<long>(pts.size()), 0.0, 1e-6, true, false, ""};
    double min_abs = std::numeric_limits<double>::infinity();
    bool sign_ok = true;
    double sign_pos = 0.0, sign_neg = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        min_abs = std::min(min_abs, std::abs(coeff[i]));
        double& region_sign = zsign[i] > 0 ? sign_pos : sign_neg;
        if (region_sign == 0.0) region_sign = coeff[i] > 0 ? 1.0 : -1.0;
        else if ((coeff[i] > 0 ? 1.0 : -1.0) != region_sign) sign_ok = false;
    }
    c.worst = min_abs;
    c.pass = sign_ok && min_abs >= c.tol;
    c.note = sign_ok ? "single sign per side of Z" : "sign flip inside a region";
    b.add(c);

    // dH(R) = 0 on level sets.
    if (b.sys.is_level_set()) {
        CheckEntry t{"level-set-tangency", static_cast<long>(pts.size()), 0.0, 1e-9, true, false, ""};
        std::vector<double> dh(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) {
            const ReebSolution sol = reeb_off_Z(b.sys, pts[i]);
            dh[i] = std::abs(b.sys.ham->h(pts[i]).g.dot(sol.vector));
        });
        for (double v : dh) t.worst = std::max(t.worst, v);
        t.pass = t.worst <= t.tol;
        b.add(t);
    }
}

void decomposition_checks(Battery& b, int n_off) {
    if (!b.sys.sing || !b.sys.sing->u || b.sys.alpha.empty() || !b.sys.off_z_sampler) return;
    const double vh = b.sys.sing->valid_halfwidth;
    auto pts = b.draw(b.sys.off_z_sampler, n_off, 2);
    CheckEntry e{"decomposition-consistency", 0, 0.0, 1e-10, true, false, ""};
    for (const Vec& p : pts) {
        if (std::abs(b.sys.sing->crit(p).v) >= vh) continue;
        e.worst = std::max(e.worst, decomposition_mismatch(b.sys, p));
        ++e.samples;
    }
    e.pass = e.worst <= e.tol;
    b.add(e);
}

void on_z_checks(Battery& b, int n_on) {
    if (!has_on_z_machinery(b.sys)) return;
    auto pts = b.draw(b.sys.on_z_sampler, n_on, 3);

    std::vector<double> theta_res(pts.size()), theta_det(pts.size()), reeb_norm(pts.size()),
        grad_norm(pts.size()), coeff(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        const Vec p = project_onto_Z(b.sys, pts[i]);
        const ZFrameData zf = decompose_on_Z(b.sys, p);
        theta_det[i] = std::abs(zf.theta_det);
        grad_norm[i] = b.sys.sing->crit(p).g.norm();
        const ReebSolution sol = reeb_on_Z(b.sys, p);
        theta_res[i] = sol.dalpha_residual;
        reeb_norm[i] = sol.vector.norm();
        coeff[i] = contact_coefficient(b.sys, p);
    });

    CheckEntry t{"on-Z-hamiltonian-residual", static_cast<long>(pts.size()), 0.0, 1e-8, true,
                 false, "iota_R Theta - du"};
    CheckEntry det{"theta-nondegeneracy", static_cast<long>(pts.size()),
                   std::numeric_limits<double>::infinity(), 1e-12, true, false, "min |theta_det|"};
    CheckEntry gr{"crit-gradient-on-Z", static_cast<long>(pts.size()),
                  std::numeric_limits<double>::infinity(), 1e-6, true, false, "min |grad z|"};
    CheckEntry cc{"contact-coefficient-on-Z", static_cast<long>(pts.size()),
                  std::numeric_limits<double>::infinity(), 1e-6, true, false, "min |coeff|"};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        t.worst = std::max(t.worst, theta_res[i]);
        det.worst = std::min(det.worst, theta_det[i]);
        gr.worst = std::min(gr.worst, grad_norm[i]);
        cc.worst = std::min(cc.worst, std::abs(coeff[i]));
    }
    t.pass = t.worst <= t.tol;
    det.pass = det.worst >= det.tol;
    gr.pass = gr.worst >= gr.tol;
    cc.pass = cc.worst >= cc.tol;
    b.add(t);
    b.add(det);
    b.add(gr);
    b.add(cc);

    if (b.sys.expect_u_nonconstant) {
        auto spread_pts = b.draw(b.sys.on_z_sampler, 500, 4);
        CheckEntry u{"u-spread-on-Z", static_cast<long>(spread_pts.size()), 0.0, 0.1, true, false,
                     "max u - min u"};
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const Vec& p : spread_pts) {
            const double v = b.sys.sing->u(p).v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        u.worst = hi - lo;
        u.pass = u.worst >= u.tol;
        b.add(u);
    }

    if (b.sys.expect_zero_reeb_on_Z) {
        CheckEntry z{"reeb-vanishes-on-Z", static_cast<long>(pts.size()), 0.0, 1e-10, true, false, ""};
        for (double v : reeb_norm) z.worst = std::max(z.worst, v);
        z.pass = z.worst <= z.tol;
        b.add(z);
    }

    // Informational: R+ invariance of the decomposition near Z.
    {
        const double delta = 0.1;
        RPlusReport rp = r_plus_invariance_check(b.sys, delta, 200, b.seed ^ 0x5bd1);
        CheckEntry e{"r-plus-invariance", rp.samples, std::max(rp.sup_du_dz, rp.sup_dbeta_dz), 1e-8,
                     true, true, rp.invariant ? "invariant" : "not invariant"};
        b.add(e);
    }
}

void liouville_checks(Battery& b, int n) {
    if (!b.sys.ham || b.sys.ham->liouville.empty() || !b.sys.ham->c || !b.sys.off_z_sampler)
        return;
    auto pts = b.draw(b.sys.off_z_sampler, n, 5);
    CheckEntry e{"liouville-margin", static_cast<long>(pts.size()),
                 std::numeric_limits<double>::infinity(), 0.0, true, false, "min Y(H)"};
    for (const Vec& p : pts) {
        const double margin = liouville_level_set(b.sys, p).second;
        e.worst = std::min(e.worst, margin);
    }
    if (b.sys.on_z_sampler) {
        auto zpts = b.draw(b.sys.on_z_sampler, n / 4 + 1, 6);
        for (const Vec& p : zpts) {
            const double margin = liouville_level_set(b.sys, project_onto_Z(b.sys, p)).second;
            e.worst = std::min(e.worst, margin);
        }
        e.samples += static_cast<long>(zpts.size());
    }
    e.pass = e.worst > e.tol;
    b.add(e);
}

void symplectization_checks(Battery& b) {
    if ((b.sys.alpha.empty() && !b.sys.sing) || !b.sys.off_z_sampler) return;
    auto pts = b.draw(b.sys.off_z_sampler, 5, 7);
    CheckEntry e{"symplectization-residual", 0, 0.0, 1e-9, true, false,
                 "X_{e^s} vs Reeb lift, s in {0, 1}"};
    for (const Vec& p : pts) {
        for (double s : {0.0, 1.0}) {
            e.worst = std::max(e.worst, symplectization_check(b.sys, p, s));
            ++e.samples;
        }
    }
    e.pass = e.worst <= e.tol;
    b.add(e);
}

} // namespace

VerificationReport run_battery(const SystemSpec& sys, std::uint64_t seed, int n_off, int n_on) {
    Battery b{sys, seed, {}};
    b.rep.system = sys.name;
    std::ostringstream hex;
    hex << std::hex << sys.spec_hash;
    b.rep.spec_hash = hex.str();
    b.rep.seed = seed;

    decomposition_checks(b, std::min(n_off, 200));
    reeb_residuals(b, n_off);
    on_z_checks(b, n_on);
    liouville_checks(b, std::min(n_off, 200));
    symplectization_checks(b);
    return b.rep;
}

std::string report_to_json(const VerificationReport& rep, bool with_environment) {
    nlohmann::json j;
    j["report_version"] = 1;
    j["system"] = rep.system;
    j["spec_hash"] = rep.spec_hash;
    j["seed"] = rep.seed;
    nlohmann::json checks = nlohmann::json::array();
    for (const CheckEntry& e : rep.checks) {
        nlohmann::json c;
        c["id"] = e.id;
        c["samples"] = e.samples;
        c["worst"] = e.worst;
        c["tol"] = e.tol;
        c["verdict"] = e.pass ? "pass" : "fail";
        c["informational"] = e.informational;
        if (!e.note.empty()) c["note"] = e.note;
        checks.push_back(std::move(c));
    }
    j["checks"] = std::move(checks);
    j["overall"] = rep.overall ? "pass" : "fail";
    if (with_environment) {
        j["environment"] = {{"version", "0.1.0"}, {"float", "ieee754-binary64"}};
    }
    return j.dump(2) + "\n";
}

} // namespace reeblab
