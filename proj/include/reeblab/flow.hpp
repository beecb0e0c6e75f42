#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reeblab/jet.hpp"
#include "reeblab/system.hpp"

namespace reeblab {

using VectorFieldFn = std::function<Vec(const Vec&)>;

enum class Termination { TimeEnd, Event, NearCritical, DomainStop };

const char* termination_name(Termination t);

// Scalar section with a crossing direction filter.
struct SectionSpec {
    ScalarField g;
    int direction = +1; // +1 increasing, -1 decreasing, 0 both
};

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;    // 0: choose automatically
    double h_max = 0.0;     // 0: |t1 - t0|
    double h_min_underflow = 1e-14;
    bool fixed_step = false;
    double h_fixed = 0.0;

    // Stop when |z| enters the guard band.  The stop band sits above the
    // hard evaluation band kZMin; with the two equal, a trajectory falling
    // into Z asymptotically crawls along the boundary in micro-steps.
    std::function<double(const Vec&)> critical;
    double guard_band = 2.0 * kZMin;

    // Stop at the first section crossing with t beyond event_t_min.
    std::optional<SectionSpec> event;
    double event_t_min = 0.0;

    std::size_t max_steps = 2'000'000;
};

// Time-stamped trajectory with stored derivatives for cubic-Hermite dense
// output.  Times are strictly monotone; periodic coordinates are stored
// unwrapped.
struct OrbitTrace {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> derivs;
    std::vector<double> steps;  // accepted step sizes, one per segment
    long rejected = 0;
    Termination reason = Termination::TimeEnd;
    std::string detail;
    double event_time = 0.0;    // set when reason == Event

    const Vec& back() const { return states.back(); }
    double t_back() const { return times.back(); }

    // Cubic Hermite interpolation inside the covered time range.
    Vec interpolate(double t) const;
};

// Embedded Dormand-Prince 5(4) with PI-free classic step control.
OrbitTrace integrate(const VectorFieldFn& field, const Vec& p0, double t0, double t1,
                     const IntegratorOptions& opt = {});

// All sign changes of g along the dense output, refined on the interpolant
// to |g| <= 1e-11, direction filter applied.
std::vector<std::pair<double, Vec>> section_crossings(const OrbitTrace& trace,
                                                      const SectionSpec& section);

// max over stored states of |F(p(t)) - F(p0)|.
double conservation_drift(const OrbitTrace& trace, const ScalarField& f);

} // namespace reeblab
