#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reeblab/expr.hpp"
#include "reeblab/forms.hpp"
#include "reeblab/jet.hpp"
#include "reeblab/rng.hpp"

namespace reeblab {

// Ambient singular expressions may not be evaluated closer to Z than this.
inline constexpr double kZMin = 1e-8;

using CoefField = std::function<Jet1(const Vec&)>;

struct Coordinate {
    std::string name;
    bool periodic = false;
    double period = 0.0;
};

// 1-form with value+gradient evaluable coefficients.  Null coefficients are
// identically zero.
struct OneFormField {
    int dim = 0;
    std::vector<CoefField> coef;

    bool empty() const { return coef.empty(); }

    FormValue value(const Vec& p) const {
        FormValue v(1, dim);
        for (int i = 0; i < dim; ++i)
            if (coef[static_cast<std::size_t>(i)]) v[static_cast<std::size_t>(i)] = coef[static_cast<std::size_t>(i)](p).v;
        return v;
    }

    // Exterior derivative from coefficient gradients: (dw)_ij = di w_j - dj w_i.
    FormValue d(const Vec& p) const {
        std::vector<Jet1> jets(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) {
            const auto& c = coef[static_cast<std::size_t>(i)];
            jets[static_cast<std::size_t>(i)] = c ? c(p) : Jet1::constant(0.0, dim);
        }
        FormValue out(2, dim);
        int idx[2];
        for (std::size_t r = 0; r < out.size(); ++r) {
            out.unrank(r, idx);
            out[r] = jets[static_cast<std::size_t>(idx[1])].g[idx[0]] -
                     jets[static_cast<std::size_t>(idx[0])].g[idx[1]];
        }
        return out;
    }
};

struct TwoFormField {
    int dim = 0;
    std::vector<CoefField> comp; // rank over increasing pairs; null = 0

    FormValue value(const Vec& p) const {
        FormValue v(2, dim);
        for (std::size_t r = 0; r < comp.size(); ++r)
            if (comp[r]) v[r] = comp[r](p).v;
        return v;
    }

    // Antisymmetric matrix M_ij = w(e_i, e_j).
    Mat matrix(const Vec& p) const {
        FormValue v = value(p);
        Mat m = Mat::Zero(dim, dim);
        int idx[2];
        for (std::size_t r = 0; r < v.size(); ++r) {
            v.unrank(r, idx);
            m(idx[0], idx[1]) = v[r];
            m(idx[1], idx[0]) = -v[r];
        }
        return m;
    }
};

// Decomposition u * d(zeta)/z^m + beta of a one-form with a pole of order m
// transverse to Z = {z = 0}.  z must depend on the singular coordinate zeta
// only; then d applied to the singular part is exactly du ^ d(zeta)/z^m.
struct SingularData {
    int m = 1;
    int axis = 0;          // index of the singular coordinate
    ScalarField crit;      // z
    ScalarField u;
    OneFormField beta;
    // |z| range on which the decomposition agrees with the ambient
    // expressions (infinite for all gallery systems except the trap chart).
    double valid_halfwidth = std::numeric_limits<double>::infinity();
};

struct HamiltonianData {
    ScalarField h;                    // chart Hamiltonian; may be piecewise at Z
    TwoFormField omega;               // (b-)symplectic form, evaluable off Z
    std::vector<CoefField> liouville; // Y components; empty if none
    std::optional<double> c;          // level for induced contact structure
};

// A fully compiled dynamical system definition.  Immutable after
// construction; evaluation is pure and safe to share across threads.
struct SystemSpec {
    std::string name;
    std::vector<Coordinate> coords;
    std::map<std::string, double> params;

    // Contact side: ambient 1-form coefficients (evaluable off Z) and/or the
    // singular decomposition.
    OneFormField alpha;
    std::optional<SingularData> sing;

    std::optional<HamiltonianData> ham;

    std::vector<ScalarField> witnesses;
    std::vector<ScalarField> witness_rates; // aligned; null entry = none

    // Sampling box for verification sweeps plus an optional rejection
    // predicate (collisions, chart borders).
    Vec sample_lo, sample_hi;
    std::function<bool(const Vec&)> sample_accept;
    // Draws an admissible point off Z (on the level set when present).
    std::function<Vec(Rng&)> off_z_sampler;
    // Draws a point of Z (intersected with the level set when present).
    std::function<Vec(Rng&)> on_z_sampler;
    // Deterministic seed grid on Z for zero hunts.
    std::function<std::vector<Vec>(int)> z_seed_grid;

    // Battery expectations.
    bool expect_u_nonconstant = false;
    bool expect_zero_reeb_on_Z = false;
    bool expect_r_plus_invariant = false;
    // Fields expected to be conserved along the Reeb flow (level sets etc).
    std::vector<std::pair<std::string, ScalarField>> conserved;

    std::uint64_t spec_hash = 0;

    int dim() const { return static_cast<int>(coords.size()); }

    bool is_level_set() const { return ham && ham->c.has_value(); }

    int coord_index(const std::string& n) const {
        for (std::size_t i = 0; i < coords.size(); ++i)
            if (coords[i].name == n) return static_cast<int>(i);
        return -1;
    }

    double crit_value(const Vec& p) const { return sing ? sing->crit(p).v : 1.0; }

    // Per-coordinate difference with periodic wrap.
    Vec wrap_diff(const Vec& a, const Vec& b) const {
        Vec d = a - b;
        for (int i = 0; i < dim(); ++i) {
            if (coords[static_cast<std::size_t>(i)].periodic) {
                const double T = coords[static_cast<std::size_t>(i)].period;
                d[i] -= T * std::round(d[i] / T);
            }
        }
        return d;
    }

    double wrap_dist(const Vec& a, const Vec& b) const { return wrap_diff(a, b).norm(); }
};

// alpha = iota_Y omega as coefficient fields (needed when a level-set system
// declares omega and a Liouville field instead of a literal contact form).
OneFormField contract_two_form(const TwoFormField& omega, const std::vector<CoefField>& y);

// Exterior derivative of the contact form at p.  Uses the ambient
// coefficients when present, otherwise du ^ d(zeta)/z^m + d(beta) from the
// decomposition.
FormValue d_alpha(const SystemSpec& sys, const Vec& p);

// Same, forced through the decomposition route.
FormValue d_alpha_decomposed(const SystemSpec& sys, const Vec& p);

FormValue alpha_value(const SystemSpec& sys, const Vec& p);

// Worst relative mismatch between the ambient coefficients and
// u * d(zeta)/z^m + beta at p (both must be present).
double decomposition_mismatch(const SystemSpec& sys, const Vec& p);

// Orthonormal basis of the orthogonal complement of the given row space,
// completed coordinate axis by coordinate axis, largest pivot first.
Mat orthonormal_complement(const Mat& rows, int dim);

// Gradient rows of the active constraints at p: level-set H when present,
// plus crit when on_z.  May be empty.
Mat constraint_rows(const SystemSpec& sys, const Vec& p, bool on_z);

// Newton projections.
Vec project_onto_level(const SystemSpec& sys, Vec p);
Vec project_onto_Z(const SystemSpec& sys, Vec p);
// Drives g (and the active constraints) to zero moving along the stacked
// gradient pseudo-inverse.
Vec project_onto_section(const SystemSpec& sys, const ScalarField& g, Vec p, bool on_z);

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_string(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL);

} // namespace reeblab
