#pragma once

#include "reeblab/system.hpp"

namespace reeblab {

struct ReebSolution {
    Vec vector;
    // Off Z: |alpha(R) - 1| and the sup-norm of iota_R d(alpha) over the
    // constraint tangent basis.  On Z there is no alpha equation; both
    // residual slots hold the sup-norm of iota_R Theta - du instead.
    double alpha_residual = 0.0;
    double dalpha_residual = 0.0;
    double conditioning = 0.0;
    bool on_z = false;
};

// Solves {d(alpha)(R, e_i) = 0 over a tangent basis, alpha(R) = 1} by least
// squares; for level sets the basis spans ker dH and dH(R) = 0 is imposed.
// Residuals are recomputed from the returned vector.
ReebSolution reeb_off_Z(const SystemSpec& sys, const Vec& p);

struct ZFrameData {
    Vec point;
    double u = 0.0;
    Vec du;
    FormValue beta{1, 1};
    FormValue dbeta{2, 1};
    FormValue theta{2, 1};       // u d(beta) + beta ^ du
    Mat tangent;                 // dim x 2 orthonormal basis of T_p Z (within the level set)
    double theta_det = 0.0;      // Theta(e1, e2); Z is 2-dimensional in scope
};

ZFrameData decompose_on_Z(const SystemSpec& sys, const Vec& p);

// iota_R Theta = du on the tangent space of Z (2x2 solve); R is tangent to Z
// by construction.
ReebSolution reeb_on_Z(const SystemSpec& sys, const Vec& p);

// Same solve without the |z| <= 1e-12 gate, for integrating the on-Z field
// (states drift off Z by integrator roundoff).
ReebSolution reeb_on_Z_at(const SystemSpec& sys, const Vec& p, double max_abs_z);

// Signed coefficient of alpha ^ (d alpha)^n against the b-volume: off Z the
// smooth rescaled coefficient z^m * (ordinary coefficient), on Z the value
// Theta(e1, e2) on the oriented adapted frame.  Zero means not contact.
double contact_coefficient(const SystemSpec& sys, const Vec& p);

// (alpha_c = iota_Y omega at p, margin = dH(Y) at p).  margin <= 0 means the
// Liouville field fails transversality at p.
std::pair<FormValue, double> liouville_level_set(const SystemSpec& sys, const Vec& p);

struct RPlusReport {
    double sup_du_dz = 0.0;
    double sup_dbeta_dz = 0.0;
    int samples = 0;
    bool invariant = false;
};

// Reports sup over collar samples (|z| <= delta) of |du/dz| and |d beta/dz|,
// the derivatives taken along the collar field X with dz(X) = 1 tangent to
// the level set.  Verdict "invariant" iff both are <= 1e-8.
RPlusReport r_plus_invariance_check(const SystemSpec& sys, double delta, int n_samples,
                                    std::uint64_t seed);

// Replaces u d(zeta)/z^m (m = 2k even) by u f_eps'(z) d(zeta) with f_eps' the
// even quartic blend matching z^-m up to second derivatives at |z| = eps.
// Outside the collar the returned system evaluates the original ambient
// coefficients, so the Reeb field agrees exactly there.
SystemSpec desingularize_even(const SystemSpec& sys, double eps);

// f_eps'(z) for the desingularized system (exposed for diagnostics/tests).
double desing_fprime(int m, double eps, double z);

// Relative residual of X_{e^s} against the Reeb lift (R, 0) in the
// symplectization with form d(e^s alpha); also folds |dH(X_H)| in.
double symplectization_check(const SystemSpec& sys, const Vec& p, double s);

// --- flowable fields --------------------------------------------------------

using VectorFieldFn = std::function<Vec(const Vec&)>;

VectorFieldFn reeb_field(const SystemSpec& sys);
VectorFieldFn reeb_field_on_Z(const SystemSpec& sys);
// X_H from iota_X omega = dH.
VectorFieldFn hamiltonian_field(const SystemSpec& sys);

} // namespace reeblab
