#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rodflow {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline Vec scaled(std::span<const double> x, double alpha) {
    Vec r(x.begin(), x.end());
    scale(r, alpha);
    return r;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

// Dense symmetric matrix, row-major storage.
struct SymMat {
    std::size_t n = 0;
    Vec a;  // n*n entries

    SymMat() = default;
    explicit SymMat(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    void symmetrize() {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double m = 0.5 * ((*this)(i, j) + (*this)(j, i));
                (*this)(i, j) = m;
                (*this)(j, i) = m;
            }
    }

    // this += alpha * v v^T
    void add_outer(double alpha, std::span<const double> v) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a[i * n + j] += alpha * v[i] * v[j];
    }

    Vec apply(std::span<const double> x) const {
        Vec y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * x[j];
            y[i] = s;
        }
        return y;
    }

    double frobenius() const {
        double s = 0.0;
        for (double v : a) s += v * v;
        return std::sqrt(s);
    }
};

inline double frobenius_dist(const SymMat& A, const SymMat& B) {
    double s = 0.0;
    for (std::size_t k = 0; k < A.a.size(); ++k) {
        const double d = A.a[k] - B.a[k];
        s += d * d;
    }
    return std::sqrt(s);
}

struct EighResult {
    Vec values;               // descending
    std::vector<Vec> vectors; // vectors[k] is the eigenvector for values[k]
};

// Cyclic Jacobi eigendecomposition for small symmetric matrices.
inline EighResult eigh(const SymMat& A0) {
    const std::size_t n = A0.n;
    SymMat A = A0;
    std::vector<Vec> V(n, Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) V[i][i] = 1.0;  // V[k] accumulates column k

    auto off = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += A(i, j) * A(i, j);
        return s;
    };

    const double tol = 1e-30 * (1.0 + A.frobenius() * A.frobenius());
    for (int sweep = 0; sweep < 100 && off() > tol; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double app = A(p, p), aqq = A(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = V[p][k], vkq = V[q][k];
                    V[p][k] = c * vkp - s * vkq;
                    V[q][k] = s * vkp + c * vkq;
                }
            }
        }
    }

    EighResult r;
    r.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.values[i] = A(i, i);
    // sort descending, stable in the original column order on ties
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return r.values[a] > r.values[b]; });
    Vec vals(n);
    std::vector<Vec> vecs(n);
    for (std::size_t k = 0; k < n; ++k) {
        vals[k] = r.values[idx[k]];
        vecs[k] = V[idx[k]];
    }
    r.values = std::move(vals);
    r.vectors = std::move(vecs);
    return r;
}

// Modified Gram-Schmidt orthonormalization of the columns in place.
// Columns with norm below `drop_tol` after projection are removed.
inline void mgs_orthonormalize(std::vector<Vec>& cols, double drop_tol = 1e-14) {
    std::vector<Vec> out;
    for (auto& c : cols) {
        for (const auto& q : out) axpy(-dot(q, c), q, c);
        for (const auto& q : out) axpy(-dot(q, c), q, c);  // second pass
        const double nrm = norm2(c);
        if (nrm > drop_tol) {
            scale(c, 1.0 / nrm);
            out.push_back(std::move(c));
        }
    }
    cols = std::move(out);
}

// Deterministic uniform doubles in [0, 1), independent of libstdc++'s
// distribution internals.
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        // Box-Muller; one value per call keeps replay simple
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    Vec uniform_vec(std::size_t n, double lo, double hi) {
        Vec v(n);
        for (auto& x : v) x = uniform(lo, hi);
        return v;
    }
};

}  // namespace rodflow
