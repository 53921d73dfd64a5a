#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "entrain/error.hpp"

namespace entrain {

using Vector = std::vector<double>;

inline constexpr double kDefaultEigenTol = 1e-12;
inline constexpr int kJacobiSweepBudget = 30;
inline constexpr double kSymmetryTol = 1e-12;

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double norm_inf(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Dense n x n matrix, row-major.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t order) : n_(order), a_(order * order, 0.0) {}

    SquareMatrix(std::initializer_list<std::initializer_list<double>> rows) : n_(rows.size()) {
        a_.reserve(n_ * n_);
        for (const auto& row : rows) {
            if (row.size() != n_) {
                throw Error(ErrorKind::InvalidInput, "SquareMatrix: ragged initializer");
            }
            a_.insert(a_.end(), row.begin(), row.end());
        }
    }

    static SquareMatrix identity(std::size_t order) {
        SquareMatrix m(order);
        for (std::size_t i = 0; i < order; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t order() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
    std::span<const double> data() const noexcept { return a_; }

    bool all_finite() const {
        return std::all_of(a_.begin(), a_.end(), [](double x) { return std::isfinite(x); });
    }

    SquareMatrix transposed() const {
        SquareMatrix t(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Vector apply(std::span<const double> v) const {
        Vector out(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j) * v[j];
            out[i] = s;
        }
        return out;
    }

    SquareMatrix& operator+=(const SquareMatrix& o) {
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }

    SquareMatrix& operator*=(double s) {
        for (double& x : a_) x *= s;
        return *this;
    }

    double frobenius() const { return norm2(a_); }

    friend SquareMatrix operator*(double s, SquareMatrix m) { return m *= s; }
    friend SquareMatrix operator+(SquareMatrix a, const SquareMatrix& b) { return a += b; }
    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

/// Symmetric matrix. Entries (i,j) and (j,i) are always bitwise equal.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;

    /// Accepts a numerically symmetric matrix and averages away rounding-level
    /// asymmetry. Asymmetry above kSymmetryTol (relative to the largest entry,
    /// floored at 1) is an error.
    static SymmetricMatrix from(const SquareMatrix& m) {
        if (!m.all_finite()) {
            throw Error(ErrorKind::InvalidInput, "SymmetricMatrix: non-finite entry");
        }
        const std::size_t n = m.order();
        double scale = 1.0;
        for (double x : m.data()) scale = std::max(scale, std::abs(x));
        double asym = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
        if (asym > kSymmetryTol * scale) {
            std::ostringstream os;
            os << "SymmetricMatrix: asymmetry " << asym << " exceeds tolerance";
            throw Error(ErrorKind::InvalidInput, os.str());
        }
        SymmetricMatrix s;
        s.m_ = SquareMatrix(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.m_(i, i) = m(i, i);
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = 0.5 * (m(i, j) + m(j, i));
                s.m_(i, j) = v;
                s.m_(j, i) = v;
            }
        }
        return s;
    }

    static SymmetricMatrix diagonal(std::span<const double> d) {
        SquareMatrix m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return from(m);
    }

    std::size_t order() const noexcept { return m_.order(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const SquareMatrix& matrix() const noexcept { return m_; }
    double frobenius() const { return m_.frobenius(); }

    double trace() const {
        double s = 0.0;
        for (std::size_t i = 0; i < order(); ++i) s += m_(i, i);
        return s;
    }

    friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

private:
    friend SymmetricMatrix sym_part(const SquareMatrix& j);
    SquareMatrix m_;
};

/// J^T + J. Note there is no 1/2 factor.
inline SymmetricMatrix sym_part(const SquareMatrix& j) {
    if (!j.all_finite()) {
        throw Error(ErrorKind::InvalidInput, "sym_part: non-finite entry");
    }
    const std::size_t n = j.order();
    SymmetricMatrix s;
    s.m_ = SquareMatrix(n);
    for (std::size_t r = 0; r < n; ++r) {
        s.m_(r, r) = 2.0 * j(r, r);
        for (std::size_t c = r + 1; c < n; ++c) {
            const double v = j(r, c) + j(c, r);
            s.m_(r, c) = v;
            s.m_(c, r) = v;
        }
    }
    return s;
}

struct EigenDecomposition {
    Vector values;         // ascending
    SquareMatrix vectors;  // column k pairs with values[k]
    int sweeps = 0;
};

/// Cyclic Jacobi. Iterates until every off-diagonal magnitude is below
/// tol * ||S||_F, or throws NonConvergence after kJacobiSweepBudget sweeps.
inline EigenDecomposition eig_sym_decompose(const SymmetricMatrix& s, double tol = kDefaultEigenTol) {
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidInput, "eig_sym: tol must be positive");
    const std::size_t n = s.order();
    SquareMatrix a = s.matrix();
    SquareMatrix v = SquareMatrix::identity(n);
    const double threshold = tol * s.frobenius();

    auto max_offdiag = [&] {
        double m = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) m = std::max(m, std::abs(a(p, q)));
        return m;
    };

    int sweep = 0;
    while (max_offdiag() > threshold) {
        if (sweep == kJacobiSweepBudget) {
            const double residual = max_offdiag() / std::max(s.frobenius(), 1e-300);
            std::ostringstream os;
            os << "eig_sym: no convergence after " << kJacobiSweepBudget
               << " sweeps, relative off-diagonal residual " << residual;
            throw NonConvergence(os.str(), residual);
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
        ++sweep;
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = SquareMatrix(n);
    out.sweeps = sweep;
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(idx[k], idx[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, idx[k]);
    }
    return out;
}

inline Vector eig_sym(const SymmetricMatrix& s, double tol = kDefaultEigenTol) {
    if (s.order() == 1) return {s(0, 0)};
    return eig_sym_decompose(s, tol).values;
}

inline double lambda_min(const SymmetricMatrix& s) { return eig_sym(s).front(); }
inline double lambda_max(const SymmetricMatrix& s) { return eig_sym(s).back(); }

/// lambda_min(S) - m: non-negative iff S >= m I.
inline double definiteness_shift(const SymmetricMatrix& s, double m) {
    if (!std::isfinite(m)) throw Error(ErrorKind::InvalidInput, "definiteness_shift: non-finite shift");
    return lambda_min(s) - m;
}

}  // namespace entrain
