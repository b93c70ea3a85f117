#pragma once

#include <variant>

#include "rodflow/linalg.hpp"

namespace rodflow {

// Canonical orientation for logging: first nonzero component made positive.
// All extent consumers are invariant under delta -> -delta.
inline void canonicalize_sign(Vec& v) {
    for (double x : v) {
        if (x != 0.0) {
            if (x < 0.0)
                for (double& y : v) y = -y;
            return;
        }
    }
}

struct ExtentDense {
    SymMat sigma;

    explicit ExtentDense(std::size_t dim) : sigma(dim) {}

    std::size_t dim() const { return sigma.n; }

    void seed_rank_one(std::span<const double> delta) {
        sigma = SymMat(sigma.n);
        sigma.add_outer(1.0, delta);
    }

    // Euler step of dSigma/dt = 1/4 (phi+ phi+^T + phi- phi-^T) - 2 Sigma
    void update(std::span<const double> phi_p, std::span<const double> phi_m, double dt) {
        scale(sigma.a, 1.0 - 2.0 * dt);
        sigma.add_outer(0.25 * dt, phi_p);
        sigma.add_outer(0.25 * dt, phi_m);
        sigma.symmetrize();
    }

    Vec principal_delta() const {
        auto e = eigh(sigma);
        Vec delta(sigma.n, 0.0);
        if (e.values.empty() || e.values[0] <= 0.0) return delta;
        const double root = std::sqrt(e.values[0]);
        for (std::size_t i = 0; i < sigma.n; ++i) delta[i] = root * e.vectors[0][i];
        canonicalize_sign(delta);
        return delta;
    }

    Vec eigenvalues() const { return eigh(sigma).values; }
};

// Sigma = V Lambda V^T with orthonormal V (dim x rank, rank <= r) and
// nonnegative Lambda sorted descending.
struct ExtentLowRank {
    std::size_t dim_ = 0;
    std::size_t max_rank = 3;
    double eps_tol = 1e-10;
    std::vector<Vec> basis;  // columns
    Vec lambda;

    ExtentLowRank(std::size_t dim, std::size_t r = 3, double tol = 1e-10)
        : dim_(dim), max_rank(r), eps_tol(tol) {}

    std::size_t dim() const { return dim_; }
    std::size_t rank() const { return basis.size(); }

    void seed_rank_one(std::span<const double> delta) {
        basis.clear();
        lambda.clear();
        const double nrm = norm2(delta);
        if (nrm <= 0.0) return;
        basis.push_back(scaled(delta, 1.0 / nrm));
        lambda.push_back(nrm * nrm);
    }

    void update(std::span<const double> phi_p, std::span<const double> phi_m, double dt) {
        // Step 1: exponential decay from the -2 Sigma term
        for (double& l : lambda) l *= (1.0 - 2.0 * dt);

        // Step 2: split the endpoint displacements into parallel and
        // perpendicular components
        auto project_residual = [&](std::span<const double> phi) {
            Vec res(phi.begin(), phi.end());
            for (const auto& q : basis) axpy(-dot(q, res), q, res);
            for (const auto& q : basis) axpy(-dot(q, res), q, res);
            return res;
        };
        Vec res_p = project_residual(phi_p);
        Vec res_m = project_residual(phi_m);

        // Step 3: augment the basis with residuals above the tolerance,
        // Gram-Schmidt among themselves (classical, two passes)
        std::vector<Vec> new_dirs;
        if (norm2(res_p) > eps_tol) {
            scale(res_p, 1.0 / norm2(res_p));
            new_dirs.push_back(std::move(res_p));
        }
        {
            for (const auto& q : new_dirs) axpy(-dot(q, res_m), q, res_m);
            for (const auto& q : new_dirs) axpy(-dot(q, res_m), q, res_m);
            if (norm2(res_m) > eps_tol) {
                scale(res_m, 1.0 / norm2(res_m));
                new_dirs.push_back(std::move(res_m));
            }
        }
        const std::size_t r0 = basis.size();
        for (auto& q : new_dirs) basis.push_back(std::move(q));
        const std::size_t ra = basis.size();
        if (ra == 0) return;

        // Step 4: accumulate the rank-2 outer-product source in coefficients
        SymMat lam_aug(ra);
        for (std::size_t i = 0; i < r0; ++i) lam_aug(i, i) = lambda[i];
        Vec cp(ra), cm(ra);
        for (std::size_t i = 0; i < ra; ++i) {
            cp[i] = dot(basis[i], phi_p);
            cm[i] = dot(basis[i], phi_m);
        }
        lam_aug.add_outer(0.25 * dt, cp);
        lam_aug.add_outer(0.25 * dt, cm);

        // Step 5: eigendecompose, keep the top r eigenpairs, rotate the
        // basis, re-orthonormalize. Tiny negative eigenvalues are clipped.
        auto e = eigh(lam_aug);
        const std::size_t keep = std::min(max_rank, ra);
        std::vector<Vec> rotated;
        Vec new_lambda;
        for (std::size_t k = 0; k < keep; ++k) {
            const double val = e.values[k] < 0.0 ? 0.0 : e.values[k];
            if (val == 0.0) continue;
            Vec col(dim_, 0.0);
            for (std::size_t i = 0; i < ra; ++i) axpy(e.vectors[k][i], basis[i], col);
            rotated.push_back(std::move(col));
            new_lambda.push_back(val);
        }
        mgs_orthonormalize(rotated);
        new_lambda.resize(rotated.size());
        basis = std::move(rotated);
        lambda = std::move(new_lambda);

        // fully decayed extents reset to empty instead of denormal drift
        if (!lambda.empty() && lambda[0] < 1e-300) {
            basis.clear();
            lambda.clear();
        }
    }

    Vec principal_delta() const {
        Vec delta(dim_, 0.0);
        if (lambda.empty() || lambda[0] <= 0.0) return delta;
        const double root = std::sqrt(lambda[0]);
        for (std::size_t i = 0; i < dim_; ++i) delta[i] = root * basis[0][i];
        canonicalize_sign(delta);
        return delta;
    }

    SymMat reconstruct() const {
        SymMat s(dim_);
        for (std::size_t k = 0; k < basis.size(); ++k) s.add_outer(lambda[k], basis[k]);
        return s;
    }

    double basis_orthonormality_error() const {
        const std::size_t r = basis.size();
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                const double g = dot(basis[i], basis[j]) - (i == j ? 1.0 : 0.0);
                s += g * g;
            }
        return std::sqrt(s);
    }
};

// Runtime-selected representation. Dense is used for small phase spaces
// (cross-validation against the factored form), low-rank otherwise.
class Extent {
  public:
    static constexpr std::size_t kDenseDimLimit = 64;

    static Extent dense(std::size_t dim) { return Extent(ExtentDense(dim)); }
    static Extent lowrank(std::size_t dim, std::size_t r = 3, double tol = 1e-10) {
        return Extent(ExtentLowRank(dim, r, tol));
    }
    static Extent auto_select(std::size_t dim, std::size_t r = 3) {
        return dim <= kDenseDimLimit ? dense(dim) : lowrank(dim, r);
    }

    std::size_t dim() const {
        return std::visit([](const auto& e) { return e.dim(); }, impl_);
    }
    bool is_dense() const { return std::holds_alternative<ExtentDense>(impl_); }
    const ExtentDense& as_dense() const { return std::get<ExtentDense>(impl_); }
    const ExtentLowRank& as_lowrank() const { return std::get<ExtentLowRank>(impl_); }

    void seed_rank_one(std::span<const double> delta) {
        std::visit([&](auto& e) { e.seed_rank_one(delta); }, impl_);
    }
    void update(std::span<const double> phi_p, std::span<const double> phi_m, double dt) {
        std::visit([&](auto& e) { e.update(phi_p, phi_m, dt); }, impl_);
    }
    Vec principal_delta() const {
        return std::visit([](const auto& e) { return e.principal_delta(); }, impl_);
    }
    double entry(std::size_t i, std::size_t j) const {
        if (is_dense()) return as_dense().sigma(i, j);
        const auto& lr = as_lowrank();
        double s = 0.0;
        for (std::size_t k = 0; k < lr.basis.size(); ++k)
            s += lr.lambda[k] * lr.basis[k][i] * lr.basis[k][j];
        return s;
    }

  private:
    explicit Extent(ExtentDense e) : impl_(std::move(e)) {}
    explicit Extent(ExtentLowRank e) : impl_(std::move(e)) {}
    std::variant<ExtentDense, ExtentLowRank> impl_;
};

}  // namespace rodflow
