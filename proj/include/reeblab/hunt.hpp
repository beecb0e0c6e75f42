#pragma once

#include <optional>

#include "reeblab/flow.hpp"
#include "reeblab/reeb.hpp"
#include "reeblab/system.hpp"

namespace reeblab {

struct PeriodicOrbitRecord {
    Vec representative;
    double period = 0.0;
    double closure_residual = 0.0; // wrap-aware, re-integrated
    std::string section_id;
    int newton_iterations = 0;
    bool on_z = false;
};

struct SingularOrbitRecord {
    Vec seed;
    Vec p_plus, p_minus;                 // limits on Z, zeros of R
    double final_distance_plus = 0.0;    // trace end to the limit
    double final_distance_minus = 0.0;
    double field_norm_plus = 0.0;        // |R|_Z| at the limits
    double field_norm_minus = 0.0;
    double abs_z_plus = 0.0, abs_z_minus = 0.0;
};

struct ZeroFamily {
    std::vector<Vec> members;
    Vec representative;
    double extent = 0.0;
};

struct ZeroFindings {
    std::vector<Vec> isolated;
    std::vector<ZeroFamily> families;
    // R|_Z vanished at (almost) every seed before any Newton step.
    bool degenerate_family = false;
};

// Damped Newton on R|_Z = 0 from each seed (2-dimensional solve in the Z
// tangent frame), deduplicated wrap-aware, clustered into families.
ZeroFindings find_zeros_on_Z(const SystemSpec& sys, const std::vector<Vec>& seeds,
                             double cluster_radius = 1.0);

// Wrap-aware hyperplane section through p transverse to direction v.
SectionSpec transverse_section(const SystemSpec& sys, const Vec& p, const Vec& v);

// First crossing of the section after t_min; throws NoReturnError.
std::pair<double, Vec> first_return(const SystemSpec& sys, const VectorFieldFn& field,
                                    const SectionSpec& section, const Vec& p, double t_max,
                                    double t_min = 1e-4);

// Newton on the section displacement map (central finite differences,
// h = 1e-6); a record is emitted only when the re-integrated closure residual
// is <= 1e-6.
PeriodicOrbitRecord refine_periodic(const SystemSpec& sys, const SectionSpec& section,
                                    const Vec& p_guess, double t_guess, bool on_z);

// Same, with a section built transverse to the flow at the (projected) guess.
PeriodicOrbitRecord refine_periodic_auto(const SystemSpec& sys, const Vec& p_guess,
                                         double t_guess, bool on_z);

struct ScanEntry {
    Vec seed;
    double displacement = 0.0;
    bool no_return = false;
};

struct ScanResult {
    std::vector<ScanEntry> entries;
    std::vector<Vec> candidates; // local minima below the threshold
};

// First-return displacement over a seed grid; local minima below 1e-2 become
// refinement candidates.
ScanResult scan_periodic(const SystemSpec& sys, const std::vector<Vec>& grid, bool on_z,
                         double t_max, double threshold = 1e-2);

// Integrates forward and backward up to t_max and certifies the asymptotic
// limits: distance to a Z-zero decreasing over the last decade of the trace,
// final distance <= 1e-3, |R|_Z| <= 1e-8 at the limit.  Throws
// InconclusiveError when the certificate cannot be established.
SingularOrbitRecord detect_singular_orbit(const SystemSpec& sys, const Vec& p0, double t_max);

struct WitnessReport {
    bool monotone = false;
    double min_abs_step = 0.0;
    double max_rate_residual = 0.0;
    bool rate_checked = false;
    bool pass = false;
};

// Strict monotonicity of the witness along the trace; when a rate field is
// given, |grad(w) . field - rate| <= 1e-8 pointwise (from the field, not
// differencing).
WitnessReport witness_check(const SystemSpec& sys, const OrbitTrace& trace,
                            const ScalarField& witness, const ScalarField* expected_rate,
                            const VectorFieldFn& field);

struct TrapRow {
    double t = 0.0;
    double theta_rate = 0.0;
    double xi_rate = 0.0;
    double dtheta_per_xi = 0.0;  // theta_rate / xi_rate
    double expected = 0.0;       // f_eps'(t) - 1
    double formula_residual = 0.0;
};

// Per-cylinder Reeb rates of the trap chart against the closed form
// ((f'-1)/f') e^{-2t} dtheta + (1/f') e^{-2t} dxi.
std::vector<TrapRow> trap_diagnostics(const SystemSpec& trap, const std::vector<double>& ts,
                                      double eps, int k);

// f_eps'(t) of the trap profile (1/t^2k inside, 1 outside, C^2 blend).
double trap_fprime_value(double t, double eps, int k);

} // namespace reeblab
