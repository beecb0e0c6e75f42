#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "reeblab/errors.hpp"

namespace reeblab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Value plus gradient.  Enough for exterior derivatives of computed one-form
// coefficients; full second-order jets are only needed for primitive scalar
// fields.
struct Jet1 {
    double v = 0.0;
    Vec g;

    Jet1() = default;
    Jet1(double value, Vec grad) : v(value), g(std::move(grad)) {}

    static Jet1 constant(double c, int n) { return {c, Vec::Zero(n)}; }
};

inline Jet1 operator+(const Jet1& a, const Jet1& b) { return {a.v + b.v, a.g + b.g}; }
inline Jet1 operator-(const Jet1& a, const Jet1& b) { return {a.v - b.v, a.g - b.g}; }
inline Jet1 operator-(const Jet1& a) { return {-a.v, -a.g}; }
inline Jet1 operator*(const Jet1& a, const Jet1& b) {
    return {a.v * b.v, a.v * b.g + b.v * a.g};
}
inline Jet1 operator*(double s, const Jet1& a) { return {s * a.v, s * a.g}; }
inline Jet1 operator*(const Jet1& a, double s) { return s * a; }

// Second-order forward-mode jet: value, gradient and Hessian with respect to
// the evaluation point.  Propagation rules keep the Hessian symmetric by
// construction.
struct Jet2 {
    double v = 0.0;
    Vec g;
    Mat h;

    Jet2() = default;
    Jet2(double value, Vec grad, Mat hess)
        : v(value), g(std::move(grad)), h(std::move(hess)) {}

    int dim() const { return static_cast<int>(g.size()); }

    static Jet2 constant(double c, int n) {
        return {c, Vec::Zero(n), Mat::Zero(n, n)};
    }
    // Seed for the i-th coordinate of an n-dimensional evaluation point.
    static Jet2 variable(double x, int i, int n) {
        Jet2 j = constant(x, n);
        j.g[i] = 1.0;
        return j;
    }

    Jet1 jet1() const { return {v, g}; }
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.g + b.g, a.h + b.h}; }
inline Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.g - b.g, a.h - b.h}; }
inline Jet2 operator-(const Jet2& a) { return {-a.v, -a.g, -a.h}; }

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
    // The cross term is symmetrized entrywise before accumulation so the
    // Hessian stays symmetric to the last bit.
    Mat cross = a.g * b.g.transpose();
    cross += Mat(cross.transpose());
    Mat h = a.v * b.h + b.v * a.h + cross;
    return {a.v * b.v, a.v * b.g + b.v * a.g, std::move(h)};
}
inline Jet2 operator*(double s, const Jet2& a) { return {s * a.v, s * a.g, s * a.h}; }
inline Jet2 operator*(const Jet2& a, double s) { return s * a; }
inline Jet2 operator+(const Jet2& a, double s) { return {a.v + s, a.g, a.h}; }
inline Jet2 operator+(double s, const Jet2& a) { return a + s; }
inline Jet2 operator-(const Jet2& a, double s) { return {a.v - s, a.g, a.h}; }
inline Jet2 operator-(double s, const Jet2& a) { return {s - a.v, -a.g, -a.h}; }

// h(u) for scalar h with first and second derivative at u.v.  The outer
// product is materialized before scaling; otherwise Eigen folds the scalar
// into one factor and the Hessian loses bitwise symmetry.
inline Jet2 compose(const Jet2& u, double f, double df, double ddf) {
    Mat outer = u.g * u.g.transpose();
    Mat h = df * u.h + ddf * outer;
    return {f, df * u.g, std::move(h)};
}

inline Jet2 reciprocal(const Jet2& u, std::size_t b = 0, std::size_t e = 0) {
    if (u.v == 0.0) throw DomainError("division by zero", b, e);
    const double iv = 1.0 / u.v;
    return compose(u, iv, -iv * iv, 2.0 * iv * iv * iv);
}

// Quotient rule written so the value component is exactly a.v / b.v; value
// mode and jet mode of the evaluator must agree to 0 ulps.
inline Jet2 div(const Jet2& a, const Jet2& b, std::size_t sb = 0, std::size_t se = 0) {
    if (b.v == 0.0) throw DomainError("division by zero", sb, se);
    const double v = a.v / b.v;
    Vec g = (a.g - v * b.g) / b.v;
    Mat cross = g * b.g.transpose();
    cross += Mat(cross.transpose());
    Mat h = (a.h - v * b.h - cross) / b.v;
    return {v, std::move(g), std::move(h)};
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return div(a, b); }
inline Jet2 operator/(const Jet2& a, double s) { return a * (1.0 / s); }

inline Jet2 sin(const Jet2& u) { return compose(u, std::sin(u.v), std::cos(u.v), -std::sin(u.v)); }
inline Jet2 cos(const Jet2& u) { return compose(u, std::cos(u.v), -std::sin(u.v), -std::cos(u.v)); }
inline Jet2 tan(const Jet2& u) {
    const double t = std::tan(u.v), s = 1.0 + t * t;
    return compose(u, t, s, 2.0 * t * s);
}
inline Jet2 atan(const Jet2& u) {
    const double d = 1.0 + u.v * u.v;
    return compose(u, std::atan(u.v), 1.0 / d, -2.0 * u.v / (d * d));
}
inline Jet2 exp(const Jet2& u) {
    const double e = std::exp(u.v);
    return compose(u, e, e, e);
}
inline Jet2 log(const Jet2& u, std::size_t b = 0, std::size_t e = 0) {
    if (u.v <= 0.0) throw DomainError("log of non-positive value", b, e);
    return compose(u, std::log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v));
}
inline Jet2 sqrt(const Jet2& u, std::size_t b = 0, std::size_t e = 0) {
    if (u.v < 0.0) throw DomainError("sqrt of negative value", b, e);
    if (u.v == 0.0) throw DomainError("sqrt jet undefined at zero", b, e);
    const double s = std::sqrt(u.v);
    return compose(u, s, 0.5 / s, -0.25 / (s * u.v));
}
inline Jet2 abs(const Jet2& u) {
    // Derivative of |x| taken as sign(x); sign(0) = 0.
    const double s = (u.v > 0.0) - (u.v < 0.0);
    return compose(u, std::abs(u.v), s, 0.0);
}

// Integer powers work for any base (including negative and, for k >= 0, zero).
inline Jet2 powi(const Jet2& u, long long k, std::size_t b = 0, std::size_t e = 0) {
    if (k == 0) return Jet2::constant(1.0, u.dim());
    if (k < 0) {
        if (u.v == 0.0) throw DomainError("zero raised to a negative power", b, e);
        return reciprocal(powi(u, -k, b, e), b, e);
    }
    const double f = std::pow(u.v, static_cast<double>(k));
    const double df = static_cast<double>(k) * std::pow(u.v, static_cast<double>(k - 1));
    const double ddf = k >= 2 ? static_cast<double>(k) * static_cast<double>(k - 1) *
                                    std::pow(u.v, static_cast<double>(k - 2))
                              : 0.0;
    return compose(u, f, df, ddf);
}

inline Jet2 pow(const Jet2& u, const Jet2& w, std::size_t b = 0, std::size_t e = 0) {
    // Integer exponents are the common case in singular denominators and
    // must accept negative bases.
    if (w.g.isZero(0.0) && w.h.isZero(0.0) && w.v == std::floor(w.v) && std::abs(w.v) < 1e15)
        return powi(u, static_cast<long long>(w.v), b, e);
    if (u.v <= 0.0)
        throw DomainError("non-integer power of a non-positive base", b, e);
    // Logarithmic differentiation with the value pinned to std::pow so value
    // mode and jet mode agree exactly.
    const Jet2 L = w * log(u, b, e);
    const double f = std::pow(u.v, w.v);
    Mat outer = L.g * L.g.transpose();
    Mat h = f * (L.h + outer);
    return {f, f * L.g, std::move(h)};
}

// A scalar field is anything jet-evaluable at a point.
using ScalarField = std::function<Jet2(const Vec&)>;

// Evaluate the field's full second-order jet at p.  Exact up to float
// roundoff: values come from forward propagation, not differencing.
inline Jet2 jet_eval(const ScalarField& f, const Vec& p) { return f(p); }

} // namespace reeblab
