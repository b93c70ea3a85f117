#pragma once

#include <functional>

#include "rodflow/linalg.hpp"
#include "rodflow/losses.hpp"
#include "rodflow/optim.hpp"

namespace rodflow::eigs {

using LinOp = std::function<Vec(std::span<const double>)>;

struct LanczosResult {
    Vec values;                // descending, size min(k_top, d)
    std::vector<Vec> vectors;  // matching Ritz vectors
    bool converged = false;
    int iterations = 0;
};

// Symmetric Lanczos with full reorthogonalization and a warm start taken
// from the previous call's Ritz basis. One solver instance per tracked
// trajectory; the cache exploits the slow drift of the top eigenspace.
class LanczosSolver {
  public:
    int budget = 40;
    double tol = 1e-7;
    int k_top = 2;

    explicit LanczosSolver(std::uint64_t seed = 20240901) : seed_(seed) {}

    void clear_cache() { cache_.clear(); }
    bool has_cache() const { return !cache_.empty(); }

    LanczosResult top_eigs(const LinOp& apply, std::size_t d) {
        const int k_eff = static_cast<int>(std::min<std::size_t>(k_top, d));
        const int max_iter = static_cast<int>(std::min<std::size_t>(budget, d));
        Rng rng(seed_);

        std::vector<Vec> basis;  // orthonormal Krylov vectors
        Vec alpha, beta;         // T diagonal / off-diagonal (beta[j] couples j and j+1)

        Vec q = warm_start_vector(d, rng);
        basis.push_back(q);

        LanczosResult res;
        for (int j = 0; j < max_iter; ++j) {
            Vec v = apply(basis[j]);
            if (!all_finite(v)) throw std::runtime_error("lanczos: operator returned non-finite");
            const double a = dot(basis[j], v);
            alpha.push_back(a);
            axpy(-a, basis[j], v);
            if (j > 0 && beta[j - 1] != 0.0) axpy(-beta[j - 1], basis[j - 1], v);
            for (const auto& b : basis) axpy(-dot(b, v), b, v);  // full reorthogonalization
            for (const auto& b : basis) axpy(-dot(b, v), b, v);

            res.iterations = j + 1;
            const double bnorm = norm2(v);

            // Ritz extraction from the (j+1)x(j+1) tridiagonal block
            const std::size_t n = alpha.size();
            SymMat T(n);
            for (std::size_t i = 0; i < n; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < n && beta.size() > i) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            auto et = eigh(T);
            bool ok = static_cast<int>(n) >= k_eff;
            for (int k = 0; ok && k < k_eff; ++k) {
                const double resid = bnorm * std::abs(et.vectors[k][n - 1]);
                if (resid > tol * std::max(std::abs(et.values[k]), 1e-300)) ok = false;
            }
            if (ok || j + 1 == max_iter) {
                res.converged = ok;
                res.values.assign(et.values.begin(), et.values.begin() + k_eff);
                res.vectors.clear();
                for (int k = 0; k < k_eff; ++k) {
                    Vec x(d, 0.0);
                    for (std::size_t i = 0; i < n; ++i) axpy(et.vectors[k][i], basis[i], x);
                    const double xn = norm2(x);
                    if (xn > 0.0) scale(x, 1.0 / xn);
                    res.vectors.push_back(std::move(x));
                }
                break;
            }

            if (bnorm > 1e-13 * (1.0 + std::abs(a))) {
                beta.push_back(bnorm);
                scale(v, 1.0 / bnorm);
                basis.push_back(std::move(v));
            } else {
                // invariant subspace: restart with a fresh orthogonal
                // direction, decoupled in T by a zero off-diagonal
                if (basis.size() >= d) {
                    res.converged = true;
                    res.values.assign(et.values.begin(), et.values.begin() + k_eff);
                    res.vectors.clear();
                    for (int k = 0; k < k_eff; ++k) {
                        Vec x(d, 0.0);
                        for (std::size_t i = 0; i < n; ++i) axpy(et.vectors[k][i], basis[i], x);
                        const double xn = norm2(x);
                        if (xn > 0.0) scale(x, 1.0 / xn);
                        res.vectors.push_back(std::move(x));
                    }
                    break;
                }
                Vec fresh = random_orthogonal(basis, d, rng);
                beta.push_back(0.0);
                basis.push_back(std::move(fresh));
            }
        }

        cache_ = res.vectors;
        return res;
    }

  private:
    Vec warm_start_vector(std::size_t d, Rng& rng) {
        if (!cache_.empty() && cache_[0].size() == d) {
            Vec q(d, 0.0);
            for (const auto& c : cache_) axpy(1.0, c, q);
            const double n = norm2(q);
            if (n > 1e-300) {
                scale(q, 1.0 / n);
                return q;
            }
        }
        Vec q(d);
        for (auto& x : q) x = rng.uniform(-1.0, 1.0);
        scale(q, 1.0 / norm2(q));
        return q;
    }

    static Vec random_orthogonal(const std::vector<Vec>& basis, std::size_t d, Rng& rng) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            Vec v(d);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            for (const auto& b : basis) axpy(-dot(b, v), b, v);
            for (const auto& b : basis) axpy(-dot(b, v), b, v);
            const double n = norm2(v);
            if (n > 1e-8) {
                scale(v, 1.0 / n);
                return v;
            }
        }
        throw std::runtime_error("lanczos: failed to generate an orthogonal restart vector");
    }

    std::uint64_t seed_;
    std::vector<Vec> cache_;
};

// lambda_max of P^{-1/2} H P^{-1/2} with P = diag(sqrt(nu_hat)) + eps I.
// `nu` may be empty (identity preconditioner, raw sharpness), a single
// scalar (uniform), or one entry per coordinate; `bc2` bias-corrects the
// second moment for the Adam family.
inline double preconditioned_sharpness(const LossFn& loss, std::span<const double> w,
                                       std::span<const double> nu, const HyperParams& hp,
                                       LanczosSolver& solver, double bc2 = 1.0) {
    const std::size_t d = loss.dim();
    Vec p_inv_sqrt(d, 1.0);
    if (!nu.empty()) {
        for (std::size_t i = 0; i < d; ++i) {
            const double nu_i = nu.size() == 1 ? nu[0] : nu[i];
            if (nu_i < 0.0) throw std::invalid_argument("preconditioned_sharpness: nu < 0");
            p_inv_sqrt[i] = 1.0 / std::sqrt(std::sqrt(nu_i / bc2) + hp.epsilon);
        }
    }
    Vec w_copy(w.begin(), w.end());
    auto op = [&loss, &w_copy, &p_inv_sqrt, d](std::span<const double> v) {
        Vec scaled_v(d);
        for (std::size_t i = 0; i < d; ++i) scaled_v[i] = p_inv_sqrt[i] * v[i];
        Vec hv = loss.hvp(w_copy, scaled_v);
        for (std::size_t i = 0; i < d; ++i) hv[i] *= p_inv_sqrt[i];
        return hv;
    };
    auto res = solver.top_eigs(op, d);
    return res.values.empty() ? 0.0 : res.values[0];
}

}  // namespace rodflow::eigs
