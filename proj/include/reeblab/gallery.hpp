#pragma once

#include <map>
#include <string>
#include <vector>

#include "reeblab/system.hpp"

namespace reeblab {

// Built-in systems.  Parameters (all optional, with defaults):
//   s1_b                      --
//   t3_bm                     m >= 1
//   s3_b                      --
//   s2s1                      --
//   trap_chart                eps > 0, k >= 1
//   rpc3bp_cartesian          mu in [0, 1/2], c (level; omit for the plain chart)
//   rpc3bp_polar              mu, c
//   rpc3bp_mcgehee            mu, c > 0
//   rpc3bp_infinity_cylinder  mu, c > 0
//   symplectization           inner system by name via the "inner_*" keys
SystemSpec builtin(const std::string& name, const std::map<std::string, double>& params = {});

std::vector<std::string> builtin_names();

// Resolves a builtin name or a config file path.
SystemSpec resolve_system(const std::string& ref, const std::map<std::string, double>& params = {});

// Coordinate pipeline Cartesian -> polar -> McGehee with claimed pullback
// relations between the symplectic forms.
struct TransformSpec {
    std::string name;
    std::vector<std::string> source_coords, target_coords;
    std::function<Vec(const Vec&)> forward, inverse;
    TwoFormField source_form, target_form; // claim: forward^* target = source
};

TransformSpec polar_transform();   // cartesian (q1,q2,p1,p2) -> (r,theta,P_r,P_alpha)
TransformSpec mcgehee_transform(); // polar -> (x,theta,P_r,P_alpha), r = 2/x^2

Vec transform_point(const TransformSpec& t, const Vec& p, bool forward_direction);

// Sup-norm mismatch of (numeric Jacobian pullback of the target form) against
// the source form at a source point; central differences, h = 1e-6.
double pullback_residual(const TransformSpec& t, const Vec& source_point);

// Rotating-frame Hamiltonian of the RPC3BP, evaluated in the requested chart.
// Cartesian is the ground truth; polar and McGehee compose through the
// inverse coordinate changes.  x = 0 is served by the infinity restriction.
double rpc3bp_hamiltonian(const std::string& chart, const Vec& state, double mu);

// (x=0, theta, P_r, P_alpha = P_r^2/2 - c): a point of the infinity cylinder
// inside the energy level c > 0.
Vec infinity_cylinder_point(double theta, double pr, double c);

// A Cartesian state with H = c > 0, outgoing radial momentum.
Vec rpc3bp_hyperbolic_seed(double mu, double c);

} // namespace reeblab
