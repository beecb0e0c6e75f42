#include "reeblab/hunt.hpp"

#include <algorithm>
#include <numeric>

#include "reeblab/errors.hpp"

namespace reeblab {

namespace {

constexpr double kZeroTol = 1e-10;  // |R|_Z| at an accepted zero
constexpr double kDedupTol = 1e-6;

// Reduced field components in the tangent frame at p.
std::pair<Eigen::Vector2d, Mat> reduced_field(const SystemSpec& sys, const Vec& p) {
    ZFrameData zf = decompose_on_Z(sys, project_onto_Z(sys, p));
    const ReebSolution sol = reeb_on_Z_at(sys, zf.point, 1e-6);
    Eigen::Vector2d f(sol.vector.dot(zf.tangent.col(0)), sol.vector.dot(zf.tangent.col(1)));
    return {f, zf.tangent};
}

} // namespace

ZeroFindings find_zeros_on_Z(const SystemSpec& sys, const std::vector<Vec>& seeds,
                             double cluster_radius) {
    ZeroFindings out;
    std::vector<Vec> zeros;
    int immediate = 0;

    for (const Vec& seed : seeds) {
        Vec p;
        try {
            p = project_onto_Z(sys, seed);
        } catch (const Error&) {
            continue;
        }
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            Eigen::Vector2d f;
            Mat frame;
            try {
                std::tie(f, frame) = reduced_field(sys, p);
            } catch (const Error&) {
                break;
            }
            const double fn = f.norm();
            if (fn <= kZeroTol) {
                if (it == 0) ++immediate;
                converged = true;
                break;
            }
            // Central-difference Jacobian of the reduced field in the frame.
            const double h = 1e-6;
            Eigen::Matrix2d J;
            bool bad = false;
            for (int j = 0; j < 2; ++j) {
                try {
                    const Eigen::Vector2d fp = reduced_field(sys, Vec(p + h * frame.col(j))).first;
                    const Eigen::Vector2d fm = reduced_field(sys, Vec(p - h * frame.col(j))).first;
                    J.col(j) = (fp - fm) / (2.0 * h);
                } catch (const Error&) {
                    bad = true;
                    break;
                }
            }
            if (bad) break;
            Eigen::Vector2d step = J.completeOrthogonalDecomposition().solve(-f);
            // Damping.
            double scale = 1.0;
            bool improved = false;
            for (int half = 0; half < 8; ++half) {
                Vec q = p + frame * (scale * step);
                try {
                    q = project_onto_Z(sys, q);
                    const Eigen::Vector2d fq = reduced_field(sys, q).first;
                    if (fq.norm() < fn) {
                        p = q;
                        improved = true;
                        break;
                    }
                } catch (const Error&) {
                }
                scale *= 0.5;
            }
            if (!improved) break;
        }
        if (converged) zeros.push_back(p);
    }

    if (!seeds.empty() && immediate >= static_cast<int>(0.9 * seeds.size())) {
        out.degenerate_family = true;
        // Keep one representative per cluster below anyway.
    }

    // Wrap-aware dedup.
    std::vector<Vec> unique;
    for (const Vec& z : zeros) {
        bool dup = false;
        for (const Vec& u : unique)
            if (sys.wrap_dist(z, u) < kDedupTol) {
                dup = true;
                break;
            }
        if (!dup) unique.push_back(z);
    }

    // Single-linkage clustering at the given radius.
    const std::size_t n = unique.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
        return parent[i] == i ? i : parent[i] = find(parent[i]);
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (sys.wrap_dist(unique[i], unique[j]) <= cluster_radius) parent[find(i)] = find(j);

    std::map<std::size_t, std::vector<Vec>> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters[find(i)].push_back(unique[i]);

    for (auto& [root, members] : clusters) {
        double extent = 0.0;
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j)
                extent = std::max(extent, sys.wrap_dist(members[i], members[j]));
        if (members.size() >= 4 && extent > 1e-2) {
            ZeroFamily fam;
            fam.members = members;
            fam.representative = members.front();
            fam.extent = extent;
            out.families.push_back(std::move(fam));
        } else {
            out.isolated.push_back(members.front());
        }
    }

    // Deterministic ordering, lexicographic on coordinates.
    auto lex = [](const Vec& a, const Vec& b) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            if (a[i] < b[i]) return true;
            if (a[i] > b[i]) return false;
        }
        return false;
    };
    std::sort(out.isolated.begin(), out.isolated.end(), lex);
    std::sort(out.families.begin(), out.families.end(),
              [&](const ZeroFamily& a, const ZeroFamily& b) {
                  return lex(a.representative, b.representative);
              });
    return out;
}

SectionSpec transverse_section(const SystemSpec& sys, const Vec& p, const Vec& v) {
    const int n = sys.dim();
    Vec vn = v.normalized();
    std::vector<Coordinate> coords = sys.coords;
    Vec p0 = p;
    SectionSpec s;
    s.direction = +1;
    s.g = [vn, p0, coords, n](const Vec& x) -> Jet2 {
        // Periodic coordinates enter through a sine so the section repeats
        // with the lattice; g is zero at p and increases along v.
        Jet2 acc = Jet2::constant(0.0, n);
        for (int i = 0; i < n; ++i) {
            if (vn[i] == 0.0) continue;
            Jet2 xi = Jet2::variable(x[i], i, n);
            if (coords[static_cast<std::size_t>(i)].periodic) {
                const double T = coords[static_cast<std::size_t>(i)].period;
                const double w = 2.0 * 3.14159265358979323846 / T;
                acc = acc + vn[i] * (1.0 / w) * sin((xi - p0[i]) * w);
            } else {
                acc = acc + vn[i] * (xi - p0[i]);
            }
        }
        return acc;
    };
    return s;
}

std::pair<double, Vec> first_return(const SystemSpec& sys, const VectorFieldFn& field,
                                    const SectionSpec& section, const Vec& p, double t_max,
                                    double t_min) {
    IntegratorOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-13;
    opt.h_max = 0.05;
    opt.event = section;
    opt.event_t_min = t_min;
    // No proactive guard here: off-Z fields stop themselves near Z, and on-Z
    // flows live inside the band by construction.
    OrbitTrace tr = integrate(field, p, 0.0, t_max, opt);
    if (tr.reason != Termination::Event)
        throw NoReturnError(sys.name + ": no section return within t_max (" +
                            termination_name(tr.reason) + ")");
    return {tr.event_time, tr.back()};
}

namespace {

double displacement_norm(const SystemSpec& sys, const Vec& a, const Vec& b) {
    return sys.wrap_dist(a, b);
}

} // namespace

PeriodicOrbitRecord refine_periodic(const SystemSpec& sys, const SectionSpec& section,
                                    const Vec& p_guess, double t_guess, bool on_z) {
    const int n = sys.dim();
    VectorFieldFn field = on_z ? reeb_field_on_Z(sys) : reeb_field(sys);
    const double t_max = std::max(3.0 * t_guess, t_guess + 5.0);

    Vec p = project_onto_section(sys, section.g, p_guess, on_z);
    if (on_z) p = project_onto_Z(sys, p);

    double period = 0.0;
    int iterations = 0;
    for (int it = 0; it <= 25; ++it) {
        iterations = it;
        auto [t1, p1] = first_return(sys, field, section, p, t_max);
        Vec d = sys.wrap_diff(p1, p);
        period = t1;
        if (d.norm() <= 1e-9) break;
        if (it == 25)
            throw NewtonStallError(sys.name + ": periodic refinement exceeded 25 iterations");

        // Move within the section (and the constraints).
        std::vector<Vec> rows;
        rows.push_back(section.g(p).g);
        if (sys.is_level_set()) rows.push_back(sys.ham->h(p).g);
        if (on_z && sys.sing) rows.push_back(sys.sing->crit(p).g);
        Mat rmat(static_cast<Eigen::Index>(rows.size()), n);
        for (std::size_t i = 0; i < rows.size(); ++i)
            rmat.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        const Mat U = orthonormal_complement(rmat, n);

        const double h = 1e-6;
        Mat J(n, U.cols());
        for (int j = 0; j < U.cols(); ++j) {
            Vec qp = project_onto_section(sys, section.g, Vec(p + h * U.col(j)), on_z);
            Vec qm = project_onto_section(sys, section.g, Vec(p - h * U.col(j)), on_z);
            if (on_z) {
                qp = project_onto_Z(sys, qp);
                qm = project_onto_Z(sys, qm);
            }
            const Vec rp = first_return(sys, field, section, qp, t_max).second;
            const Vec rm = first_return(sys, field, section, qm, t_max).second;
            J.col(j) = (sys.wrap_diff(rp, qp) - sys.wrap_diff(rm, qm)) / (2.0 * h);
        }
        Vec step = J.completeOrthogonalDecomposition().solve(-d);
        Vec q = project_onto_section(sys, section.g, Vec(p + U * step), on_z);
        if (on_z) q = project_onto_Z(sys, q);
        p = q;
    }

    // Re-validate by one clean period from the representative.
    IntegratorOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-13;
    opt.h_max = 0.05;
    OrbitTrace tr = integrate(field, p, 0.0, period, opt);
    const double closure = displacement_norm(sys, tr.back(), p);
    if (closure > 1e-6)
        throw NewtonStallError(sys.name + ": closure residual " + std::to_string(closure));

    PeriodicOrbitRecord rec;
    rec.representative = p;
    rec.period = period;
    rec.closure_residual = closure;
    rec.newton_iterations = iterations;
    rec.on_z = on_z;
    rec.section_id = "transverse-hyperplane";
    return rec;
}

PeriodicOrbitRecord refine_periodic_auto(const SystemSpec& sys, const Vec& p_guess,
                                         double t_guess, bool on_z) {
    Vec p = p_guess;
    if (on_z) p = project_onto_Z(sys, p);
    else p = project_onto_level(sys, p);
    const Vec v = on_z ? reeb_on_Z_at(sys, p, 1e-6).vector : reeb_off_Z(sys, p).vector;
    if (v.norm() < 1e-12)
        throw NewtonStallError(sys.name + ": flow vanishes at the periodic guess");
    return refine_periodic(sys, transverse_section(sys, p, v), p, t_guess, on_z);
}

ScanResult scan_periodic(const SystemSpec& sys, const std::vector<Vec>& grid, bool on_z,
                         double t_max, double threshold) {
    ScanResult out;
    VectorFieldFn field = on_z ? reeb_field_on_Z(sys) : reeb_field(sys);
    for (const Vec& seed : grid) {
        ScanEntry e;
        e.seed = seed;
        try {
            Vec p = on_z ? project_onto_Z(sys, seed) : project_onto_level(sys, seed);
            const Vec v = on_z ? reeb_on_Z_at(sys, p, 1e-6).vector : reeb_off_Z(sys, p).vector;
            if (v.norm() < 1e-12) {
                e.no_return = true;
            } else {
                SectionSpec section = transverse_section(sys, p, v);
                auto [t1, p1] = first_return(sys, field, section, p, t_max);
                e.displacement = displacement_norm(sys, p1, p);
            }
        } catch (const NoReturnError&) {
            e.no_return = true;
        } catch (const Error&) {
            e.no_return = true;
        }
        out.entries.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        const ScanEntry& e = out.entries[i];
        if (e.no_return || e.displacement >= threshold) continue;
        const bool left_ok = i == 0 || out.entries[i - 1].no_return ||
                             out.entries[i - 1].displacement >= e.displacement;
        const bool right_ok = i + 1 == out.entries.size() || out.entries[i + 1].no_return ||
                              out.entries[i + 1].displacement >= e.displacement;
        if (left_ok && right_ok) out.candidates.push_back(e.seed);
    }
    return out;
}

namespace {

struct AsymptoticLimit {
    Vec limit;
    double final_distance;
    double field_norm;
    double abs_z;
};

AsymptoticLimit asymptotic_limit(const SystemSpec& sys, const Vec& p0, double t_dir_max) {
    IntegratorOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-13;
    if (sys.sing) {
        ScalarField crit = sys.sing->crit;
        opt.critical = [crit](const Vec& x) { return crit(x).v; };
    }
    VectorFieldFn field = reeb_field(sys);
    OrbitTrace tr = integrate(field, p0, 0.0, t_dir_max, opt);

    // The limit candidate: on-Z Newton zero started from the trace end.
    Vec guess = tr.back();
    ZeroFindings zf = find_zeros_on_Z(sys, {guess});
    Vec limit;
    if (!zf.isolated.empty()) limit = zf.isolated.front();
    else if (!zf.families.empty()) limit = zf.families.front().representative;
    else throw InconclusiveError(sys.name + ": no Z-zero reachable from the trace end");

    // Monotone distance over the last decade of the trace.
    const double t_end = std::abs(tr.t_back());
    const double t_lo = t_end / 10.0;
    double prev = std::numeric_limits<double>::infinity();
    int checked = 0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        if (std::abs(tr.times[i]) < t_lo) continue;
        const double d = sys.wrap_dist(tr.states[i], limit);
        if (d > prev * (1.0 + 1e-6) + 1e-12)
            throw InconclusiveError(sys.name + ": distance to the candidate limit not monotone");
        prev = d;
        ++checked;
    }
    if (checked < 3) throw InconclusiveError(sys.name + ": trace too short for the certificate");

    AsymptoticLimit out;
    out.limit = limit;
    out.final_distance = sys.wrap_dist(tr.back(), limit);
    if (out.final_distance > 1e-3)
        throw InconclusiveError(sys.name + ": final distance " +
                                std::to_string(out.final_distance) + " above 1e-3");
    out.field_norm = reeb_on_Z_at(sys, limit, 1e-6).vector.norm();
    out.abs_z = std::abs(sys.sing->crit(limit).v);
    if (out.field_norm > 1e-8)
        throw InconclusiveError(sys.name + ": limit is not a Reeb zero");
    if (out.abs_z > 1e-10) throw InconclusiveError(sys.name + ": limit is off Z");
    return out;
}

} // namespace

SingularOrbitRecord detect_singular_orbit(const SystemSpec& sys, const Vec& p0, double t_max) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no critical set");
    SingularOrbitRecord rec;
    rec.seed = p0;
    AsymptoticLimit fwd = asymptotic_limit(sys, p0, t_max);
    AsymptoticLimit bwd = asymptotic_limit(sys, p0, -t_max);
    rec.p_plus = fwd.limit;
    rec.final_distance_plus = fwd.final_distance;
    rec.field_norm_plus = fwd.field_norm;
    rec.abs_z_plus = fwd.abs_z;
    rec.p_minus = bwd.limit;
    rec.final_distance_minus = bwd.final_distance;
    rec.field_norm_minus = bwd.field_norm;
    rec.abs_z_minus = bwd.abs_z;
    return rec;
}

WitnessReport witness_check(const SystemSpec& sys, const OrbitTrace& trace,
                            const ScalarField& witness, const ScalarField* expected_rate,
                            const VectorFieldFn& field) {
    (void)sys;
    WitnessReport rep;
    if (trace.states.size() < 3) return rep;

    double prev = witness(trace.states.front()).v;
    int sign = 0;
    rep.monotone = true;
    rep.min_abs_step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < trace.states.size(); ++i) {
        const double w = witness(trace.states[i]).v;
        const double step = w - prev;
        const int s = step > 0 ? 1 : (step < 0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) rep.monotone = false;
        if (sign == 0) sign = s;
        rep.min_abs_step = std::min(rep.min_abs_step, std::abs(step));
        prev = w;
    }

    if (expected_rate) {
        rep.rate_checked = true;
        for (const Vec& p : trace.states) {
            const Jet2 wj = witness(p);
            const double rate = wj.g.dot(field(p));
            const double want = (*expected_rate)(p).v;
            rep.max_rate_residual = std::max(rep.max_rate_residual, std::abs(rate - want));
        }
    }
    rep.pass = rep.monotone && (!rep.rate_checked || rep.max_rate_residual <= 1e-8);
    return rep;
}

double trap_fprime_value(double t, double eps, int k) {
    const double at = std::abs(t);
    if (at <= 0.5 * eps) return std::pow(t, -2 * k);
    if (at >= eps) return 1.0;
    const double u = (at - 0.5 * eps) * (2.0 / eps);
    const double s = u * u * u * (6.0 * u * u - 15.0 * u + 10.0);
    return (1.0 - s) * std::pow(t, -2 * k) + s;
}

std::vector<TrapRow> trap_diagnostics(const SystemSpec& trap, const std::vector<double>& ts,
                                      double eps, int k) {
    std::vector<TrapRow> rows;
    for (double t : ts) {
        TrapRow row;
        row.t = t;
        Vec p(3);
        p << t, 0.3, 1.0;
        Vec r;
        if (std::abs(t) <= kZMin) {
            r = reeb_on_Z_at(trap, project_onto_Z(trap, p), 1e-6).vector;
        } else {
            r = reeb_off_Z(trap, p).vector;
        }
        row.xi_rate = r[1];
        row.theta_rate = r[2];
        const double fp = trap_fprime_value(t, eps, k);
        if (std::abs(t) <= kZMin) {
            row.expected = std::numeric_limits<double>::infinity();
            row.dtheta_per_xi = std::numeric_limits<double>::infinity();
            Vec want(3);
            want << 0.0, 0.0, 1.0;
            row.formula_residual = (r - want).cwiseAbs().maxCoeff();
        } else {
            row.expected = fp - 1.0;
            row.dtheta_per_xi = row.theta_rate / row.xi_rate;
            const double e2t = std::exp(-2.0 * t);
            Vec want(3);
            want << 0.0, e2t / fp, (fp - 1.0) / fp * e2t;
            row.formula_residual = (r - want).cwiseAbs().maxCoeff();
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace reeblab
