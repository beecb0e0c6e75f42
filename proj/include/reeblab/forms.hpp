#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "reeblab/errors.hpp"
#include "reeblab/jet.hpp"

namespace reeblab {

// Pointwise antisymmetric k-tensor, k <= 3, in dimension <= 6.  Only strictly
// increasing multi-indices are stored, in lexicographic order; antisymmetry
// is structural.
class FormValue {
  public:
    static constexpr int kMaxDegree = 3;
    static constexpr int kMaxDim = 7; // 6 + the symplectization coordinate

    FormValue(int degree, int dim)
        : degree_(degree), dim_(dim), comp_(static_cast<std::size_t>(choose(dim, degree)), 0.0) {
        if (degree < 0 || degree > kMaxDegree)
            throw DimensionError("form degree out of range");
        if (dim < 1 || dim > kMaxDim) throw DimensionError("form dimension out of range");
    }

    int degree() const { return degree_; }
    int dim() const { return dim_; }
    std::size_t size() const { return comp_.size(); }

    double& operator[](std::size_t r) { return comp_[r]; }
    double operator[](std::size_t r) const { return comp_[r]; }

    // Component for a strictly increasing multi-index.
    double& at(std::initializer_list<int> idx) { return comp_[rank(idx.begin(), static_cast<int>(idx.size()))]; }
    double at(std::initializer_list<int> idx) const { return comp_[rank(idx.begin(), static_cast<int>(idx.size()))]; }

    double sup_norm() const {
        double m = 0.0;
        for (double c : comp_) m = std::max(m, std::abs(c));
        return m;
    }

    static long choose(int n, int k) {
        if (k < 0 || k > n) return 0;
        long r = 1;
        for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
        return r;
    }

    // Rank of a strictly increasing multi-index in lexicographic order.
    std::size_t rank(const int* idx, int k) const {
        if (k != degree_) throw DimensionError("multi-index length mismatch");
        std::size_t r = 0;
        int prev = -1;
        for (int t = 0; t < k; ++t) {
            for (int j = prev + 1; j < idx[t]; ++j)
                r += static_cast<std::size_t>(choose(dim_ - 1 - j, k - 1 - t));
            prev = idx[t];
        }
        return r;
    }

    // Inverse of rank().
    void unrank(std::size_t r, int* idx) const {
        int prev = -1;
        for (int t = 0; t < degree_; ++t) {
            int j = prev + 1;
            while (true) {
                std::size_t block = static_cast<std::size_t>(choose(dim_ - 1 - j, degree_ - 1 - t));
                if (r < block) break;
                r -= block;
                ++j;
            }
            idx[t] = j;
            prev = j;
        }
    }

    FormValue& operator+=(const FormValue& o) {
        check_same(o);
        for (std::size_t i = 0; i < comp_.size(); ++i) comp_[i] += o.comp_[i];
        return *this;
    }
    FormValue& operator-=(const FormValue& o) {
        check_same(o);
        for (std::size_t i = 0; i < comp_.size(); ++i) comp_[i] -= o.comp_[i];
        return *this;
    }
    FormValue& operator*=(double s) {
        for (double& c : comp_) c *= s;
        return *this;
    }

    friend FormValue operator+(FormValue a, const FormValue& b) { return a += b; }
    friend FormValue operator-(FormValue a, const FormValue& b) { return a -= b; }
    friend FormValue operator*(FormValue a, double s) { return a *= s; }
    friend FormValue operator*(double s, FormValue a) { return a *= s; }

  private:
    void check_same(const FormValue& o) const {
        if (o.degree_ != degree_ || o.dim_ != dim_)
            throw DimensionError("form degree/dimension mismatch");
    }

    int degree_, dim_;
    std::vector<double> comp_;
};

// Alternating product.  Bilinear and graded-commutative.
inline FormValue wedge(const FormValue& a, const FormValue& b) {
    if (a.dim() != b.dim()) throw DimensionError("wedge of forms in different dimensions");
    const int k = a.degree(), l = b.degree(), n = a.dim();
    if (k + l > n) throw DimensionError("wedge degree exceeds dimension");
    if (k + l > FormValue::kMaxDegree)
        throw DimensionError("wedge degree out of supported range");

    FormValue out(k + l, n);
    std::array<int, FormValue::kMaxDegree> ia{}, ib{};
    std::array<int, 2 * FormValue::kMaxDegree> merged{};
    for (std::size_t ra = 0; ra < a.size(); ++ra) {
        if (a[ra] == 0.0) continue;
        a.unrank(ra, ia.data());
        for (std::size_t rb = 0; rb < b.size(); ++rb) {
            if (b[rb] == 0.0) continue;
            b.unrank(rb, ib.data());
            // Merge the two increasing index sets, counting inversions.
            int i = 0, j = 0, t = 0;
            int inversions = 0;
            bool clash = false;
            while (i < k && j < l) {
                if (ia[i] == ib[j]) { clash = true; break; }
                if (ia[i] < ib[j]) {
                    merged[t++] = ia[i++];
                } else {
                    merged[t++] = ib[j++];
                    inversions += k - i;
                }
            }
            if (clash) continue;
            while (i < k) merged[t++] = ia[i++];
            while (j < l) merged[t++] = ib[j++];
            const double sign = (inversions % 2 == 0) ? 1.0 : -1.0;
            out[out.rank(merged.data(), k + l)] += sign * a[ra] * b[rb];
        }
    }
    return out;
}

// Interior product iota_v a.  Satisfies contract(v, contract(v, a)) = 0 and
// the antiderivation rule on wedges.
inline FormValue contract(const Vec& v, const FormValue& a) {
    if (static_cast<int>(v.size()) != a.dim())
        throw DimensionError("vector/form dimension mismatch");
    if (a.degree() < 1) throw DimensionError("cannot contract a 0-form");
    FormValue out(a.degree() - 1, a.dim());
    std::array<int, FormValue::kMaxDegree> idx{};
    std::array<int, FormValue::kMaxDegree> rest{};
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (a[r] == 0.0) continue;
        a.unrank(r, idx.data());
        for (int t = 0; t < a.degree(); ++t) {
            int m = 0;
            for (int s = 0; s < a.degree(); ++s)
                if (s != t) rest[m++] = idx[s];
            const double sign = (t % 2 == 0) ? 1.0 : -1.0;
            const double term = sign * v[idx[t]] * a[r];
            if (a.degree() == 1) {
                out[0] += term;
            } else {
                out[out.rank(rest.data(), a.degree() - 1)] += term;
            }
        }
    }
    return out;
}

// a(v_1, ..., v_k) by repeated contraction from the left.
inline double eval_on(const FormValue& a, const std::vector<Vec>& vs) {
    if (static_cast<int>(vs.size()) != a.degree())
        throw DimensionError("wrong number of vectors");
    FormValue cur = a;
    for (const Vec& v : vs) cur = contract(v, cur);
    return cur[0];
}

inline double eval_on1(const FormValue& a, const Vec& v) {
    FormValue c = contract(v, a);
    return c[0];
}

inline double eval_on2(const FormValue& a, const Vec& v, const Vec& w) {
    return eval_on1(contract(v, a), w);
}

} // namespace reeblab
