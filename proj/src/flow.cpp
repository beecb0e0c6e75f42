#include "reeblab/flow.hpp"

#include <algorithm>
#include <cmath>

#include "reeblab/errors.hpp"

namespace reeblab {

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::TimeEnd: return "time-out";
        case Termination::Event: return "event";
        case Termination::NearCritical: return "near-critical";
        case Termination::DomainStop: return "domain-error";
    }
    return "?";
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

struct StepResult {
    Vec y_new;
    Vec f_new; // FSAL
    double err = 0.0;
};

StepResult dp_step(const VectorFieldFn& f, double t, const Vec& y, const Vec& f0, double h,
                   double rtol, double atol) {
    const Vec k1 = f0;
    const Vec k2 = f(y + h * (a21 * k1));
    const Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
    const Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    StepResult r;
    r.y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    r.f_new = f(r.y_new);
    const Vec errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.f_new);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(r.y_new[i]));
        const double q = errv[i] / sc;
        acc += q * q;
    }
    r.err = std::sqrt(acc / static_cast<double>(y.size()));
    (void)t;
    return r;
}

Vec hermite(double t, double t0, double t1, const Vec& y0, const Vec& y1, const Vec& f0,
            const Vec& f1) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

// Bisection + Newton on the dense interpolant for g(x(t)) = 0 within a step.
std::pair<double, Vec> refine_crossing(const OrbitTrace& tr, std::size_t seg,
                                       const ScalarField& g) {
    const double ta = tr.times[seg], tb = tr.times[seg + 1];
    auto value = [&](double t) {
        return g(hermite(t, ta, tb, tr.states[seg], tr.states[seg + 1], tr.derivs[seg],
                         tr.derivs[seg + 1]))
            .v;
    };
    double lo = ta, hi = tb;
    double glo = value(lo);
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const Vec x = hermite(t, ta, tb, tr.states[seg], tr.states[seg + 1], tr.derivs[seg],
                              tr.derivs[seg + 1]);
        const Jet2 gj = g(x);
        if (std::abs(gj.v) <= 1e-11) return {t, x};
        // dg/dt along the interpolant (derivative of the Hermite polynomial).
        const double h = tb - ta, s = (t - ta) / h;
        const double dh00 = (6 * s * s - 6 * s) / h;
        const double dh10 = 3 * s * s - 4 * s + 1;
        const double dh01 = (-6 * s * s + 6 * s) / h;
        const double dh11 = 3 * s * s - 2 * s;
        const Vec xdot = dh00 * tr.states[seg] + dh10 * tr.derivs[seg] +
                         dh01 * tr.states[seg + 1] + dh11 * tr.derivs[seg + 1];
        const double dg = gj.g.dot(xdot);
        double t_next = dg != 0.0 ? t - gj.v / dg : 0.5 * (lo + hi);
        // Keep the bracket.
        if ((gj.v > 0) == (glo > 0)) {
            lo = t;
            glo = gj.v;
        } else {
            hi = t;
        }
        if (!(t_next > std::min(lo, hi) && t_next < std::max(lo, hi)))
            t_next = 0.5 * (lo + hi);
        t = t_next;
    }
    const Vec x = hermite(t, ta, tb, tr.states[seg], tr.states[seg + 1], tr.derivs[seg],
                          tr.derivs[seg + 1]);
    return {t, x};
}

bool direction_ok(int direction, double ga, double gb, double tdir) {
    // Direction is with respect to flow time.
    const double rise = (gb - ga) * tdir;
    if (direction > 0) return rise > 0;
    if (direction < 0) return rise < 0;
    return true;
}

} // namespace

Vec OrbitTrace::interpolate(double t) const {
    if (times.size() == 1) return states[0];
    const bool fwd = times.back() >= times.front();
    std::size_t seg = 0;
    // Binary search for the segment containing t.
    std::size_t lo = 0, hi = times.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        const bool left = fwd ? (t < times[mid]) : (t > times[mid]);
        if (left) hi = mid;
        else lo = mid;
    }
    seg = lo;
    return hermite(t, times[seg], times[seg + 1], states[seg], states[seg + 1], derivs[seg],
                   derivs[seg + 1]);
}

OrbitTrace integrate(const VectorFieldFn& field, const Vec& p0, double t0, double t1,
                     const IntegratorOptions& opt) {
    OrbitTrace tr;
    const double tdir = t1 >= t0 ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const double h_max = opt.h_max > 0 ? opt.h_max : span;

    Vec y = p0;
    double t = t0;
    Vec fy = field(y); // let a bad start point throw to the caller

    tr.times.push_back(t);
    tr.states.push_back(y);
    tr.derivs.push_back(fy);

    if (opt.critical && std::abs(opt.critical(y)) <= opt.guard_band) {
        tr.reason = Termination::NearCritical;
        return tr;
    }
    if (span == 0.0) return tr;

    double h;
    if (opt.fixed_step) {
        h = opt.h_fixed;
    } else if (opt.h_init > 0) {
        h = opt.h_init;
    } else {
        h = std::min(h_max, 0.01 * span / (1.0 + fy.norm()));
        h = std::max(h, 1e-10);
    }

    double prev_sign = 0.0;
    if (opt.event) {
        const double g0 = opt.event->g(y).v;
        prev_sign = g0 > 0 ? 1.0 : (g0 < 0 ? -1.0 : 0.0);
    }

    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        if (tdir * (t1 - t) <= 0) break;
        h = std::min(h, h_max);
        bool last = false;
        if (h >= std::abs(t1 - t)) {
            h = std::abs(t1 - t);
            last = true;
        }

        StepResult sr;
        try {
            sr = dp_step(field, t, y, fy, tdir * h, opt.rtol, opt.atol);
        } catch (const NearCriticalError&) {
            if (opt.fixed_step) {
                tr.reason = Termination::NearCritical;
                return tr;
            }
            h *= 0.5;
            if (h < opt.h_min_underflow) {
                tr.reason = Termination::NearCritical;
                return tr;
            }
            continue;
        } catch (const DomainError& err) {
            if (opt.fixed_step) {
                tr.reason = Termination::DomainStop;
                tr.detail = err.what();
                return tr;
            }
            h *= 0.5;
            if (h < opt.h_min_underflow) {
                tr.reason = Termination::DomainStop;
                tr.detail = err.what();
                return tr;
            }
            continue;
        }

        if (!opt.fixed_step && sr.err > 1.0) {
            ++tr.rejected;
            const double fac = std::max(0.2, 0.9 * std::pow(sr.err, -0.2));
            h *= fac;
            if (h < opt.h_min_underflow) {
                std::string state = "[";
                for (Eigen::Index i = 0; i < y.size(); ++i)
                    state += (i ? ", " : "") + std::to_string(y[i]);
                throw StepFailureError("step size underflow at t = " + std::to_string(t) +
                                       ", last state " + state + "]");
            }
            continue;
        }

        const double t_new = last ? t1 : t + tdir * h;
        tr.times.push_back(t_new);
        tr.states.push_back(sr.y_new);
        tr.derivs.push_back(sr.f_new);
        tr.steps.push_back(tdir * (t_new - t));

        // Section event?
        if (opt.event) {
            const double g_new = opt.event->g(sr.y_new).v;
            const double new_sign = g_new > 0 ? 1.0 : (g_new < 0 ? -1.0 : 0.0);
            if (prev_sign != 0.0 && new_sign != 0.0 && new_sign != prev_sign &&
                direction_ok(opt.event->direction, prev_sign, new_sign, tdir)) {
                auto [tc, xc] = refine_crossing(tr, tr.times.size() - 2, opt.event->g);
                if (tdir * (tc - opt.event_t_min) >= 0.0 &&
                    std::abs(opt.event->g(xc).v) <= 1e-9) {
                    tr.times.back() = tc;
                    tr.states.back() = xc;
                    tr.derivs.back() = field(xc);
                    tr.steps.back() = tdir * (tc - t);
                    tr.reason = Termination::Event;
                    tr.event_time = tc;
                    return tr;
                }
            }
            if (new_sign != 0.0) prev_sign = new_sign;
        }

        // Guard band around Z.
        if (opt.critical && std::abs(opt.critical(sr.y_new)) <= opt.guard_band) {
            tr.reason = Termination::NearCritical;
            return tr;
        }

        t = t_new;
        y = sr.y_new;
        fy = sr.f_new;

        if (last) {
            tr.reason = Termination::TimeEnd;
            return tr;
        }
        if (!opt.fixed_step) {
            const double fac =
                sr.err == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(sr.err, -0.2), 0.2, 10.0);
            h *= fac;
        }
    }
    tr.reason = Termination::TimeEnd;
    return tr;
}

std::vector<std::pair<double, Vec>> section_crossings(const OrbitTrace& trace,
                                                      const SectionSpec& section) {
    std::vector<std::pair<double, Vec>> out;
    if (trace.times.size() < 2) return out;
    const double tdir = trace.times.back() >= trace.times.front() ? 1.0 : -1.0;
    // Exact zeros (a trace starting on the section) carry no sign.
    const double g0 = section.g(trace.states[0]).v;
    double last_sign = g0 > 0 ? 1.0 : (g0 < 0 ? -1.0 : 0.0);
    for (std::size_t seg = 0; seg + 1 < trace.times.size(); ++seg) {
        const double gb = section.g(trace.states[seg + 1]).v;
        const double sb = gb > 0 ? 1.0 : (gb < 0 ? -1.0 : 0.0);
        if (last_sign != 0.0 && sb != 0.0 && sb != last_sign) {
            if (direction_ok(section.direction, last_sign, sb, tdir)) {
                auto hit = refine_crossing(trace, seg, section.g);
                if (std::abs(section.g(hit.second).v) <= 1e-9) out.push_back(std::move(hit));
            }
        }
        if (sb != 0.0) last_sign = sb;
    }
    return out;
}

double conservation_drift(const OrbitTrace& trace, const ScalarField& f) {
    if (trace.states.empty()) return 0.0;
    const double f0 = f(trace.states.front()).v;
    double worst = 0.0;
    for (const Vec& s : trace.states) worst = std::max(worst, std::abs(f(s).v - f0));
    return worst;
}

} // namespace reeblab
