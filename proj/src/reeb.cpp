#include "reeblab/reeb.hpp"

#include <Eigen/SVD>

#include "reeblab/errors.hpp"

namespace reeblab {

namespace {

constexpr double kLevelTol = 1e-9;
constexpr double kOnZTol = 1e-12;
constexpr double kSolverGuard = 1e-6;

void require_level(const SystemSpec& sys, const Vec& p) {
    if (!sys.is_level_set()) return;
    const double h = sys.ham->h(p).v;
    if (std::abs(h - *sys.ham->c) > kLevelTol)
        throw OffLevelSetError(sys.name + ": |H - c| = " + std::to_string(std::abs(h - *sys.ham->c)));
}

Mat dalpha_matrix(const FormValue& da) {
    const int n = da.dim();
    Mat A = Mat::Zero(n, n);
    int idx[2];
    for (std::size_t r = 0; r < da.size(); ++r) {
        da.unrank(r, idx);
        A(idx[0], idx[1]) = da[r];
        A(idx[1], idx[0]) = -da[r];
    }
    return A;
}

} // namespace

namespace {

// The solve itself is leaf-relative (it uses dH rows, never c), so flows may
// evaluate it at Runge-Kutta stage points that sit slightly off the declared
// level set.
ReebSolution reeb_off_Z_impl(const SystemSpec& sys, const Vec& p, bool check_level) {
    const int n = sys.dim();
    if (sys.sing) {
        const double z = sys.sing->crit(p).v;
        if (std::abs(z) <= kZMin)
            throw NearCriticalError(sys.name + ": |z| = " + std::to_string(std::abs(z)) +
                                    " inside the guard band");
    }
    if (check_level) require_level(sys, p);

    const FormValue av = alpha_value(sys, p);
    const FormValue dav = d_alpha(sys, p);
    const Mat A = dalpha_matrix(dav);
    const Mat C = constraint_rows(sys, p, false);
    const Mat E = orthonormal_complement(C, n); // tangent basis (n x t)
    const int t = static_cast<int>(E.cols());

    Mat M(t + 1 + C.rows(), n);
    Vec rhs = Vec::Zero(t + 1 + C.rows());
    for (int i = 0; i < t; ++i) M.row(i) = (A * E.col(i)).transpose();
    for (int i = 0; i < n; ++i) M(t, i) = av[static_cast<std::size_t>(i)];
    rhs[t] = 1.0;
    for (int i = 0; i < C.rows(); ++i) M.row(t + 1 + i) = C.row(i);

    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smin <= 1e-12 * std::max(smax, 1.0))
        throw DegenerateError(sys.name + ": form is not contact at the point (rank deficient)");

    ReebSolution sol;
    sol.vector = svd.solve(rhs);
    sol.conditioning = smax / smin;
    sol.alpha_residual = std::abs(eval_on1(av, sol.vector) - 1.0);
    double worst = 0.0;
    const FormValue ira = contract(sol.vector, dav);
    for (int i = 0; i < t; ++i) worst = std::max(worst, std::abs(eval_on1(ira, E.col(i))));
    sol.dalpha_residual = worst;
    if (sol.alpha_residual > kSolverGuard || sol.dalpha_residual > kSolverGuard)
        throw DegenerateError(sys.name + ": Reeb residuals exceed the solver tolerance");
    return sol;
}

} // namespace

ReebSolution reeb_off_Z(const SystemSpec& sys, const Vec& p) {
    return reeb_off_Z_impl(sys, p, true);
}

namespace {

ZFrameData decompose_at(const SystemSpec& sys, const Vec& p) {
    if (!sys.sing || !sys.sing->u)
        throw MissingDecompositionError(sys.name + ": no decomposition data");
    const SingularData& s = *sys.sing;
    const int n = sys.dim();

    ZFrameData zf;
    zf.point = p;
    const Jet2 uj = s.u(p);
    zf.u = uj.v;
    zf.du = uj.g;
    zf.beta = s.beta.value(p);
    zf.dbeta = s.beta.d(p);

    FormValue du_form(1, n);
    for (int i = 0; i < n; ++i) du_form[static_cast<std::size_t>(i)] = zf.du[i];
    zf.theta = zf.u * zf.dbeta + wedge(zf.beta, du_form);

    const Mat C = constraint_rows(sys, p, true);
    zf.tangent = orthonormal_complement(C, n);
    if (zf.tangent.cols() != 2)
        throw DimensionError(sys.name + ": on-Z solve needs a 2-dimensional critical set");
    zf.theta_det = eval_on2(zf.theta, zf.tangent.col(0), zf.tangent.col(1));
    return zf;
}

} // namespace

ZFrameData decompose_on_Z(const SystemSpec& sys, const Vec& p) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no decomposition data");
    const double z = sys.sing->crit(p).v;
    if (std::abs(z) > kOnZTol)
        throw DomainError(sys.name + ": point is not on Z (|z| = " + std::to_string(std::abs(z)) + ")");
    return decompose_at(sys, p);
}

namespace {

ReebSolution solve_on_Z(const SystemSpec& sys, const ZFrameData& zf) {
    if (std::abs(zf.theta_det) < 1e-12)
        throw DegenerateThetaError(sys.name + ": |Theta(e1,e2)| = " + std::to_string(std::abs(zf.theta_det)));
    // Theta(R, e_j) = du(e_j), R = sum_i r_i e_i.
    Eigen::Matrix2d T;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            T(j, i) = eval_on2(zf.theta, zf.tangent.col(i), zf.tangent.col(j));
    Eigen::Vector2d rhs(zf.du.dot(zf.tangent.col(0)), zf.du.dot(zf.tangent.col(1)));
    Eigen::Vector2d r = T.fullPivLu().solve(rhs);

    ReebSolution sol;
    sol.on_z = true;
    sol.vector = zf.tangent * r;
    sol.conditioning = std::abs(T.norm() / zf.theta_det);
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double lhs = eval_on2(zf.theta, sol.vector, zf.tangent.col(j));
        worst = std::max(worst, std::abs(lhs - zf.du.dot(zf.tangent.col(j))));
    }
    sol.alpha_residual = worst;
    sol.dalpha_residual = worst;
    if (worst > 1e-10 * std::max(1.0, T.norm()))
        throw DegenerateThetaError(sys.name + ": on-Z residual " + std::to_string(worst));
    return sol;
}

} // namespace

ReebSolution reeb_on_Z(const SystemSpec& sys, const Vec& p) {
    return solve_on_Z(sys, decompose_on_Z(sys, p));
}

ReebSolution reeb_on_Z_at(const SystemSpec& sys, const Vec& p, double max_abs_z) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no decomposition data");
    const double z = sys.sing->crit(p).v;
    if (std::abs(z) > max_abs_z)
        throw DomainError(sys.name + ": point left the Z collar");
    return solve_on_Z(sys, decompose_at(sys, p));
}

double contact_coefficient(const SystemSpec& sys, const Vec& p) {
    const int n = sys.dim();
    const int level_dim = sys.is_level_set() ? n - 1 : n;
    const int n_wedge = (level_dim - 1) / 2;

    const double z = sys.sing ? sys.sing->crit(p).v : 1.0;
    if (sys.sing && std::abs(z) <= kZMin) {
        // Decomposition route: coefficient against the b-volume equals
        // Theta(e1, e2) on the oriented adapted frame.
        ZFrameData zf = decompose_at(sys, p);
        Mat frame(n, n);
        const Mat C = constraint_rows(sys, p, true);
        // z-direction first, then the level direction, then the tangent
        // basis; orientation against the ambient coordinate order.
        Vec gz = sys.sing->crit(p).g.normalized();
        int col = 0;
        frame.col(col++) = gz;
        if (sys.is_level_set()) {
            Vec gh = sys.ham->h(p).g;
            gh -= gz.dot(gh) * gz;
            frame.col(col++) = gh.normalized();
        }
        frame.col(col++) = zf.tangent.col(0);
        frame.col(col++) = zf.tangent.col(1);
        const double orient = frame.determinant() > 0 ? 1.0 : -1.0;
        return orient * zf.theta_det;
    }

    const FormValue av = alpha_value(sys, p);
    FormValue top = av;
    if (n_wedge >= 1) {
        const FormValue dav = d_alpha(sys, p);
        for (int k = 0; k < n_wedge; ++k) top = wedge(top, dav);
    }

    double ordinary;
    if (!sys.is_level_set()) {
        ordinary = top[0]; // single component of a degree-n form
    } else {
        Vec gh = sys.ham->h(p).g;
        Mat E = orthonormal_complement(gh.transpose(), n);
        Mat frame(n, n);
        frame.col(0) = gh.normalized();
        for (int i = 0; i < E.cols(); ++i) frame.col(1 + i) = E.col(i);
        if (frame.determinant() < 0) E.col(0) = -E.col(0);
        std::vector<Vec> vs;
        for (int i = 0; i < E.cols(); ++i) vs.push_back(E.col(i));
        ordinary = eval_on(top, vs);
    }
    return sys.sing ? std::pow(z, sys.sing->m) * ordinary : ordinary;
}

std::pair<FormValue, double> liouville_level_set(const SystemSpec& sys, const Vec& p) {
    if (!sys.ham || sys.ham->liouville.empty())
        throw MissingDecompositionError(sys.name + ": no Liouville field declared");
    if (sys.ham->c) {
        const double h = sys.ham->h(p).v;
        if (std::abs(h - *sys.ham->c) > kLevelTol)
            throw OffLevelSetError(sys.name + ": point is off the level set");
    }
    const int n = sys.dim();
    Vec y(n);
    for (int i = 0; i < n; ++i)
        y[i] = sys.ham->liouville[static_cast<std::size_t>(i)]
                   ? sys.ham->liouville[static_cast<std::size_t>(i)](p).v
                   : 0.0;
    const double margin = sys.ham->h(p).g.dot(y);
    if (sys.sing && std::abs(sys.sing->crit(p).v) <= kZMin) {
        // The ambient omega is singular here; report the decomposition, with
        // the singular-axis slot holding the b-coefficient u (the factor of
        // d(zeta)/z^m).
        if (!sys.sing->u)
            throw MissingDecompositionError(sys.name + ": no decomposition data on Z");
        FormValue alpha_c = sys.sing->beta.value(p);
        alpha_c[static_cast<std::size_t>(sys.sing->axis)] = sys.sing->u(p).v;
        return {alpha_c, margin};
    }
    FormValue alpha_c = contract(y, sys.ham->omega.value(p));
    return {alpha_c, margin};
}

RPlusReport r_plus_invariance_check(const SystemSpec& sys, double delta, int n_samples,
                                    std::uint64_t seed) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no decomposition data");
    if (!sys.on_z_sampler) throw Error(sys.name + ": no Z sampler");
    const SingularData& s = *sys.sing;
    const int n = sys.dim();
    Rng rng(seed);

    RPlusReport rep;
    rep.samples = n_samples;
    for (int k = 0; k < n_samples; ++k) {
        Vec p = sys.on_z_sampler(rng);
        const double zt = rng.uniform(-delta, delta);
        // Move along the singular axis until crit = zt, reprojecting onto the
        // level set after each move.
        for (int it = 0; it < 8; ++it) {
            const Jet2 cz = s.crit(p);
            const double dzd = cz.g[s.axis];
            if (std::abs(dzd) < 1e-12) throw DegenerateError(sys.name + ": crit gradient vanished");
            p[s.axis] += (zt - cz.v) / dzd;
            if (sys.is_level_set()) {
                for (int jt = 0; jt < 6; ++jt) {
                    const Jet2 hj = sys.ham->h(p);
                    const double r = hj.v - *sys.ham->c;
                    if (std::abs(r) < 1e-13) break;
                    p -= r * hj.g / hj.g.squaredNorm();
                }
            }
            if (std::abs(s.crit(p).v - zt) < 1e-13) break;
        }

        // Collar direction: dz(X) = 1, tangent to the level set, min norm.
        Mat rows(sys.is_level_set() ? 2 : 1, n);
        rows.row(0) = s.crit(p).g.transpose();
        Vec b(rows.rows());
        b[0] = 1.0;
        if (sys.is_level_set()) {
            rows.row(1) = sys.ham->h(p).g.transpose();
            b[1] = 0.0;
        }
        Vec xc = rows.completeOrthogonalDecomposition().solve(b);

        rep.sup_du_dz = std::max(rep.sup_du_dz, std::abs(s.u(p).g.dot(xc)));
        for (int i = 0; i < n; ++i) {
            const auto& cf = s.beta.coef[static_cast<std::size_t>(i)];
            if (!cf) continue;
            rep.sup_dbeta_dz = std::max(rep.sup_dbeta_dz, std::abs(cf(p).g.dot(xc)));
        }
    }
    rep.invariant = rep.sup_du_dz <= 1e-8 && rep.sup_dbeta_dz <= 1e-8;
    return rep;
}

double desing_fprime(int m, double eps, double z) {
    const double az = std::abs(z);
    if (az >= eps) return std::pow(z, -m); // m even
    const int k = m / 2;
    // Even quartic a + b z^2 + c z^4 matching value and two derivatives of
    // z^-2k at eps; positive on the collar with minimum eps^-2k at the seam.
    const double e2k = std::pow(eps, -m);
    const double a = e2k * (1.0 + 0.5 * k * (k + 3));
    const double b = -e2k / (eps * eps) * static_cast<double>(k) * (k + 2);
    const double c = e2k / (eps * eps * eps * eps) * 0.5 * k * (k + 1);
    const double z2 = z * z;
    return a + b * z2 + c * z2 * z2;
}

SystemSpec desingularize_even(const SystemSpec& sys, double eps) {
    if (!sys.sing) throw MissingDecompositionError(sys.name + ": no decomposition data");
    if (sys.sing->m % 2 != 0)
        throw OddOrderError(sys.name + ": folded (odd order) desingularization unsupported");
    if (eps <= 0.0) throw ParamError("eps must be positive");

    RPlusReport conv = r_plus_invariance_check(sys, eps, 64, 1234);
    if (conv.sup_dbeta_dz > 1e-8)
        throw NotAlmostConvexError(sys.name + ": beta varies across the collar (sup " +
                                   std::to_string(conv.sup_dbeta_dz) + ")");

    const SingularData s = *sys.sing;
    const int m = s.m;
    const int n = sys.dim();

    SystemSpec out;
    out.name = sys.name + "_desing";
    out.coords = sys.coords;
    out.params = sys.params;
    out.params["eps"] = eps;
    out.sample_lo = sys.sample_lo;
    out.sample_hi = sys.sample_hi;
    out.sample_accept = sys.sample_accept;
    out.spec_hash = hash_string(out.name, sys.spec_hash);

    out.alpha.dim = n;
    out.alpha.coef.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        CoefField orig = sys.alpha.empty() ? CoefField() : sys.alpha.coef[static_cast<std::size_t>(i)];
        CoefField beta_i = s.beta.coef[static_cast<std::size_t>(i)];
        if (i == s.axis) {
            ScalarField u = s.u;
            ScalarField crit = s.crit;
            const int axis = s.axis;
            (void)axis;
            out.alpha.coef[static_cast<std::size_t>(i)] = [=](const Vec& p) -> Jet1 {
                const Jet2 zj = crit(p);
                if (std::abs(zj.v) >= eps) {
                    // Outside the collar the form is untouched: evaluate the
                    // original expressions so the Reeb field agrees exactly.
                    if (orig) return orig(p);
                    return (u(p) * powi(zj, -m)).jet1();
                }
                // u * f_eps'(z); the quartic is smooth through Z.
                const double z = zj.v;
                const int k = m / 2;
                const double e2k = std::pow(eps, -m);
                const double a = e2k * (1.0 + 0.5 * k * (k + 3));
                const double b = -e2k / (eps * eps) * static_cast<double>(k) * (k + 2);
                const double c = e2k / (eps * eps * eps * eps) * 0.5 * k * (k + 1);
                const double z2 = z * z;
                const double f = a + b * z2 + c * z2 * z2;
                const double df = 2.0 * b * z + 4.0 * c * z2 * z;
                Jet2 fj = compose(zj, f, df, 2.0 * b + 12.0 * c * z2);
                return (u(p) * fj).jet1();
            };
        } else {
            if (orig && beta_i) {
                ScalarField crit = s.crit;
                out.alpha.coef[static_cast<std::size_t>(i)] = [=](const Vec& p) -> Jet1 {
                    return std::abs(crit(p).v) >= eps ? orig(p) : beta_i(p);
                };
            } else {
                out.alpha.coef[static_cast<std::size_t>(i)] = orig ? orig : beta_i;
            }
        }
    }
    return out;
}

double symplectization_check(const SystemSpec& sys, const Vec& p, double s) {
    const int n = sys.dim();
    const ReebSolution reeb = reeb_off_Z(sys, p);

    const FormValue av = alpha_value(sys, p);
    const Mat A = dalpha_matrix(d_alpha(sys, p));
    const double es = std::exp(s);

    // Omega~ = e^s (ds ^ alpha + d alpha) on coordinates (x_1..x_n, s).
    Mat W = Mat::Zero(n + 1, n + 1);
    W.topLeftCorner(n, n) = es * A;
    for (int j = 0; j < n; ++j) {
        W(n, j) = es * av[static_cast<std::size_t>(j)];
        W(j, n) = -es * av[static_cast<std::size_t>(j)];
    }

    // Tangent basis of Sigma_c x R (all of M x R when no level set).
    const Mat C = constraint_rows(sys, p, false);
    const Mat E = orthonormal_complement(C, n);
    const int t = static_cast<int>(E.cols());
    Mat B = Mat::Zero(n + 1, t + 1);
    B.topLeftCorner(n, t) = E;
    B(n, t) = 1.0;

    Vec dh = Vec::Zero(n + 1);
    dh[n] = es; // H = e^s

    // iota_X W (b_j) = X^T W b_j = sum_i c_i b_i^T W b_j = dH(b_j).
    Mat G(t + 1, t + 1);
    Vec rhs(t + 1);
    for (int j = 0; j <= t; ++j) {
        rhs[j] = dh.dot(B.col(j));
        for (int i = 0; i <= t; ++i) G(j, i) = B.col(i).transpose() * W * B.col(j);
    }
    Vec c = G.fullPivLu().solve(rhs);
    Vec x = B * c;

    // Scalar making the M-parts match.
    const Vec xm = x.head(n);
    const double lambda = xm.dot(reeb.vector) / reeb.vector.squaredNorm();
    if (lambda == 0.0) return std::numeric_limits<double>::infinity();
    Vec lift = Vec::Zero(n + 1);
    lift.head(n) = reeb.vector;
    const double res = (x / lambda - lift).norm() / reeb.vector.norm();
    const double dh_res = std::abs(dh.dot(x)) / std::max(1.0, x.norm() * es);
    return std::max(res, dh_res);
}

VectorFieldFn reeb_field(const SystemSpec& sys) {
    return [sys](const Vec& p) { return reeb_off_Z_impl(sys, p, false).vector; };
}

VectorFieldFn reeb_field_on_Z(const SystemSpec& sys) {
    return [sys](const Vec& p) { return reeb_on_Z_at(sys, p, 1e-6).vector; };
}

VectorFieldFn hamiltonian_field(const SystemSpec& sys) {
    if (!sys.ham) throw Error(sys.name + ": no Hamiltonian data");
    return [sys](const Vec& p) -> Vec {
        const Mat M = sys.ham->omega.matrix(p);
        const Vec dh = sys.ham->h(p).g;
        // iota_X w = dH: M^T X = dH, i.e. -M X = dH.
        return M.fullPivLu().solve(-dh);
    };
}

} // namespace reeblab
