#include "reeblab/system.hpp"

#include <cstring>

#include "reeblab/errors.hpp"

namespace reeblab {

OneFormField contract_two_form(const TwoFormField& omega, const std::vector<CoefField>& y) {
    OneFormField a;
    a.dim = omega.dim;
    a.coef.resize(static_cast<std::size_t>(omega.dim));
    for (int j = 0; j < omega.dim; ++j) {
        a.coef[static_cast<std::size_t>(j)] = [omega, y, j](const Vec& p) {
            const int n = omega.dim;
            // (iota_Y w)_j = sum_i Y^i w_ij
            Jet1 acc = Jet1::constant(0.0, n);
            FormValue wv(2, n);
            int idx[2];
            for (std::size_t r = 0; r < omega.comp.size(); ++r) {
                if (!omega.comp[r]) continue;
                wv.unrank(r, idx);
                const int i0 = idx[0], i1 = idx[1];
                if (i0 != j && i1 != j) continue;
                Jet1 w = omega.comp[r](p);
                if (i1 == j) {
                    // contributes + Y^{i0} w_{i0 j}
                    if (y[static_cast<std::size_t>(i0)]) acc = acc + y[static_cast<std::size_t>(i0)](p) * w;
                } else {
                    // i0 == j: w_{i1 j} = -w_{j i1}
                    if (y[static_cast<std::size_t>(i1)]) acc = acc - y[static_cast<std::size_t>(i1)](p) * w;
                }
            }
            return acc;
        };
    }
    return a;
}

FormValue alpha_value(const SystemSpec& sys, const Vec& p) {
    if (!sys.alpha.empty()) return sys.alpha.value(p);
    if (!sys.sing) throw Error(sys.name + ": system has no contact form data");
    const SingularData& s = *sys.sing;
    const double z = s.crit(p).v;
    if (std::abs(z) <= kZMin)
        throw NearCriticalError("ambient singular evaluation inside the z_min guard band");
    FormValue v = s.beta.value(p);
    v[static_cast<std::size_t>(s.axis)] += s.u(p).v / std::pow(z, s.m);
    return v;
}

FormValue d_alpha_decomposed(const SystemSpec& sys, const Vec& p) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no decomposition data");
    const SingularData& s = *sys.sing;
    const double z = s.crit(p).v;
    if (std::abs(z) <= kZMin)
        throw NearCriticalError("singular term evaluated inside the z_min guard band");
    FormValue out = s.beta.d(p);
    // du ^ d(zeta) / z^m; the u d(z^-m)^d(zeta) term vanishes because z
    // depends on zeta only.
    const Jet2 uj = s.u(p);
    const double zm = std::pow(z, s.m);
    int idx[2];
    for (std::size_t r = 0; r < out.size(); ++r) {
        out.unrank(r, idx);
        if (idx[0] == s.axis) out[r] += -uj.g[idx[1]] / zm;
        else if (idx[1] == s.axis) out[r] += uj.g[idx[0]] / zm;
    }
    return out;
}

FormValue d_alpha(const SystemSpec& sys, const Vec& p) {
    if (sys.sing) {
        const double z = sys.sing->crit(p).v;
        if (std::abs(z) <= 1e-12 && !sys.sing->u)
            throw SingularPointError(sys.name +
                                     ": point lies on Z and no decomposition data is supplied");
        if (std::abs(z) <= kZMin)
            throw NearCriticalError("ambient singular evaluation inside the z_min guard band");
    }
    if (!sys.alpha.empty()) return sys.alpha.d(p);
    return d_alpha_decomposed(sys, p);
}

double decomposition_mismatch(const SystemSpec& sys, const Vec& p) {
    if (!sys.sing || sys.alpha.empty())
        throw MissingDecompositionError(sys.name + ": need both ambient and decomposition data");
    const SingularData& s = *sys.sing;
    const double z = s.crit(p).v;
    if (std::abs(z) <= kZMin)
        throw NearCriticalError("consistency check inside the z_min guard band");
    FormValue ambient = sys.alpha.value(p);
    FormValue dec = s.beta.value(p);
    dec[static_cast<std::size_t>(s.axis)] += s.u(p).v / std::pow(z, s.m);
    double worst = 0.0;
    for (std::size_t i = 0; i < ambient.size(); ++i) {
        const double scale = std::max({std::abs(ambient[i]), std::abs(dec[i]), 1.0});
        worst = std::max(worst, std::abs(ambient[i] - dec[i]) / scale);
    }
    return worst;
}

Mat orthonormal_complement(const Mat& rows, int dim) {
    std::vector<Vec> basis;
    // Orthonormalize the constraint rows first.
    for (int r = 0; r < rows.rows(); ++r) {
        Vec v = rows.row(r).transpose();
        for (const Vec& b : basis) v -= b.dot(v) * b;
        const double nrm = v.norm();
        if (nrm > 1e-13) basis.push_back(v / nrm);
    }
    const std::size_t n_constraints = basis.size();
    const std::size_t want = static_cast<std::size_t>(dim) - n_constraints;
    Mat out(dim, static_cast<Eigen::Index>(want));
    for (std::size_t k = 0; k < want; ++k) {
        // Largest-pivot completion: take the coordinate axis with the
        // largest residual after projecting out what we have.
        int best = -1;
        double best_norm = -1.0;
        Vec best_res;
        for (int i = 0; i < dim; ++i) {
            Vec v = Vec::Zero(dim);
            v[i] = 1.0;
            for (const Vec& b : basis) v -= b.dot(v) * b;
            const double nrm = v.norm();
            if (nrm > best_norm + 1e-15) {
                best_norm = nrm;
                best = i;
                best_res = v;
            }
        }
        if (best < 0 || best_norm < 1e-13) throw DegenerateError("cannot complete tangent basis");
        Vec b = best_res / best_norm;
        basis.push_back(b);
        out.col(static_cast<Eigen::Index>(k)) = b;
    }
    return out;
}

Mat constraint_rows(const SystemSpec& sys, const Vec& p, bool on_z) {
    std::vector<Vec> rows;
    if (sys.is_level_set()) rows.push_back(sys.ham->h(p).g);
    if (on_z) {
        if (!sys.sing) throw MissingDecompositionError(sys.name + ": no critical function");
        rows.push_back(sys.sing->crit(p).g);
    }
    Mat m(static_cast<Eigen::Index>(rows.size()), sys.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

Vec project_onto_level(const SystemSpec& sys, Vec p) {
    if (!sys.is_level_set()) return p;
    for (int it = 0; it < 50; ++it) {
        const Jet2 hj = sys.ham->h(p);
        const double r = hj.v - *sys.ham->c;
        if (std::abs(r) < 1e-13) break;
        p -= r * hj.g / hj.g.squaredNorm();
    }
    return p;
}

Vec project_onto_Z(const SystemSpec& sys, Vec p) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no critical function");
    const SingularData& s = *sys.sing;
    for (int it = 0; it < 60; ++it) {
        const Jet2 cz = s.crit(p);
        const double g = cz.g[s.axis];
        if (std::abs(g) < 1e-12) throw DegenerateError(sys.name + ": crit gradient vanished");
        p[s.axis] -= cz.v / g;
        p = project_onto_level(sys, p);
        if (std::abs(s.crit(p).v) < 1e-14 &&
            (!sys.is_level_set() || std::abs(sys.ham->h(p).v - *sys.ham->c) < 1e-12))
            break;
    }
    return p;
}

Vec project_onto_section(const SystemSpec& sys, const ScalarField& g, Vec p, bool on_z) {
    const int n = sys.dim();
    for (int it = 0; it < 60; ++it) {
        const Jet2 gj = g(p);
        std::vector<Jet2> cons;
        if (sys.is_level_set()) cons.push_back(sys.ham->h(p));
        if (on_z) cons.push_back(sys.sing->crit(p));
        Mat rows(1 + static_cast<int>(cons.size()), n);
        Vec res(rows.rows());
        rows.row(0) = gj.g.transpose();
        res[0] = gj.v;
        for (std::size_t i = 0; i < cons.size(); ++i) {
            rows.row(1 + static_cast<Eigen::Index>(i)) = cons[i].g.transpose();
            res[1 + static_cast<Eigen::Index>(i)] =
                cons[i].v - (sys.is_level_set() && i == 0 ? *sys.ham->c : 0.0);
        }
        if (res.cwiseAbs().maxCoeff() < 1e-13) break;
        p -= rows.completeOrthogonalDecomposition().solve(res);
    }
    return p;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_string(const std::string& s, std::uint64_t h) {
    return fnv1a(s.data(), s.size(), h);
}

} // namespace reeblab
