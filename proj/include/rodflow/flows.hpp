#pragma once

#include "rodflow/bea.hpp"
#include "rodflow/extent.hpp"
#include "rodflow/linalg.hpp"
#include "rodflow/losses.hpp"
#include "rodflow/optim.hpp"

namespace rodflow {

struct FlowConfig {
    int substeps = 10;
    double dt = 0.1;
    bool bea_correction = false;

    void validate() const {
        if (substeps <= 0 || !(dt > 0.0) || std::abs(substeps * dt - 1.0) > 1e-12)
            throw std::invalid_argument("[flow] substeps * dt must equal 1");
        if (!(dt < 0.5)) throw std::invalid_argument("[flow] dt must be in (0, 0.5)");
    }
};

struct BcFactors {
    double bc1 = 1.0;
    double bc2 = 1.0;
};

// Bias-correction factors at step index t+1 (the moment that drives the
// update from t is the one the correction must apply to).
inline BcFactors bc_factors(OptimizerKind kind, const HyperParams& hp, long long t) {
    if (!uses_bias_correction(kind)) return {};
    BcFactors f;
    f.bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t + 1));
    f.bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t + 1));
    return f;
}

struct StableState {
    Vec w;
    std::optional<Vec> m;
    std::optional<Vec> nu;
    long long synth_t = 0;
};

struct RodState {
    Vec wbar;
    std::optional<Vec> mbar;
    std::optional<Vec> nubar;
    Extent extent;
    long long synth_t = 0;

    std::size_t dim() const { return wbar.size(); }
    std::size_t phase_dim() const { return wbar.size() + (mbar ? mbar->size() : 0); }

    Vec center() const {
        Vec z = wbar;
        if (mbar) z.insert(z.end(), mbar->begin(), mbar->end());
        return z;
    }
};

namespace detail {

// preconditioned per-component step sizes eta * P^{-1}(nu_hat)
inline Vec preconditioned_eta(const HyperParams& hp, std::span<const double> nu, bool scalar_nu,
                              std::size_t d, double bc2) {
    Vec eta(d);
    if (scalar_nu) {
        const double e = hp.eta / (std::sqrt(nu[0] / bc2) + hp.epsilon);
        eta.assign(d, e);
    } else {
        for (std::size_t i = 0; i < d; ++i)
            eta[i] = hp.eta / (std::sqrt(nu[i] / bc2) + hp.epsilon);
    }
    return eta;
}

}  // namespace detail

// Phase-space displacement Phi(z) so that z_{t+1} = z_t + Phi(z_t).
// `z` has dimension d for non-momentum kinds and 2d for momentum kinds;
// `nu` supplies the preconditioner for adaptive kinds (bias-corrected via
// bc.bc2). If `grad_out` is given, the gradient used inside Phi is stored.
inline Vec phase_displacement(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                              std::span<const double> z, std::span<const double> nu,
                              const BcFactors& bc, Vec* grad_out = nullptr) {
    const std::size_t d = loss.dim();
    const bool mom = has_momentum(kind);
    if (z.size() != (mom ? 2 * d : d)) throw DimensionError("phase_displacement: bad z size");
    const auto w = z.subspan(0, d);
    const auto m = mom ? z.subspan(d, d) : std::span<const double>{};

    Vec g;
    if (kind == OptimizerKind::Nesterov) {
        Vec theta(w.begin(), w.end());
        axpy(-hp.eta * hp.beta1, m, theta);
        g = loss.grad(theta);
    } else {
        g = loss.grad(w);
    }
    if (!all_finite(g)) throw DivergenceError(-1);

    Vec phi(z.size());
    switch (kind) {
        case OptimizerKind::GD: {
            for (std::size_t i = 0; i < d; ++i) phi[i] = -hp.eta * g[i];
            break;
        }
        case OptimizerKind::ScalarRMSProp:
        case OptimizerKind::RMSProp: {
            Vec eta = detail::preconditioned_eta(hp, nu, has_scalar_nu(kind), d, 1.0);
            for (std::size_t i = 0; i < d; ++i) phi[i] = -eta[i] * g[i];
            break;
        }
        case OptimizerKind::HeavyBall:
        case OptimizerKind::Nesterov: {
            const double b = hp.beta1;
            for (std::size_t i = 0; i < d; ++i) {
                phi[i] = -hp.eta * (b * m[i] + (1.0 - b) * g[i]);
                phi[d + i] = (1.0 - b) * (g[i] - m[i]);
            }
            break;
        }
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::Adam:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::NAdam: {
            const bool nesterov_style =
                kind == OptimizerKind::NAdam || kind == OptimizerKind::ScalarNAdam;
            const double b = hp.beta1;
            const double bm = nesterov_style ? b * b : b;
            Vec eta = detail::preconditioned_eta(hp, nu, has_scalar_nu(kind), d, bc.bc2);
            for (std::size_t i = 0; i < d; ++i) {
                phi[i] = -eta[i] * (bm * m[i] + (1.0 - bm) * g[i]) / bc.bc1;
                phi[d + i] = (1.0 - b) * (g[i] - m[i]);
            }
            break;
        }
    }
    if (grad_out) *grad_out = std::move(g);
    return phi;
}

struct RodRhs {
    Vec dwbar;
    std::optional<Vec> dmbar;
    std::optional<Vec> dnubar;
    Vec phi_plus, phi_minus;
};

// Rod-flow right-hand side at an explicit center/half-displacement pair.
// `zbar` and `delta` live in phase space (2d) for momentum kinds. The
// output is invariant under delta -> -delta.
inline RodRhs rod_rhs_at(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                         std::span<const double> zbar, std::span<const double> nubar,
                         std::span<const double> delta, long long synth_t) {
    const std::size_t d = loss.dim();
    const BcFactors bc = bc_factors(kind, hp, synth_t);

    Vec zp = add(zbar, delta);
    Vec zm = sub(zbar, delta);
    Vec gp, gm;
    Vec phi_p = phase_displacement(kind, hp, loss, zp, nubar, bc, &gp);
    Vec phi_m = phase_displacement(kind, hp, loss, zm, nubar, bc, &gm);

    RodRhs rhs;
    rhs.dwbar.resize(d);
    for (std::size_t i = 0; i < d; ++i) rhs.dwbar[i] = 0.5 * (phi_p[i] + phi_m[i]);
    if (has_momentum(kind)) {
        Vec dm(d);
        for (std::size_t i = 0; i < d; ++i) dm[i] = 0.5 * (phi_p[d + i] + phi_m[d + i]);
        rhs.dmbar = std::move(dm);
    }
    if (is_adaptive(kind)) {
        // The second moment is smooth at EoS, so only its midpoint is
        // tracked; gradients enter through the endpoint squares. For the
        // Adam family gp/gm are the endpoint-position gradients (no
        // look-ahead exists for these kinds).
        if (has_scalar_nu(kind)) {
            Vec dnu(1);
            dnu[0] = (1.0 - hp.beta2) * (0.5 * (dot(gp, gp) + dot(gm, gm)) - nubar[0]);
            rhs.dnubar = std::move(dnu);
        } else {
            Vec dnu(d);
            for (std::size_t i = 0; i < d; ++i)
                dnu[i] = (1.0 - hp.beta2) * (0.5 * (gp[i] * gp[i] + gm[i] * gm[i]) - nubar[i]);
            rhs.dnubar = std::move(dnu);
        }
    }
    rhs.phi_plus = std::move(phi_p);
    rhs.phi_minus = std::move(phi_m);
    return rhs;
}

inline RodRhs rod_rhs(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                      const RodState& rod) {
    const Vec z = rod.center();
    const Vec delta = rod.extent.principal_delta();
    std::span<const double> nu =
        rod.nubar ? std::span<const double>(*rod.nubar) : std::span<const double>{};
    return rod_rhs_at(kind, hp, loss, z, nu, delta, rod.synth_t);
}

struct StableRhs {
    Vec dw;
    std::optional<Vec> dm;
    std::optional<Vec> dnu;
};

// Naive continuous-time limit of the discrete optimizer.
inline StableRhs stable_rhs(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                            const StableState& s) {
    const std::size_t d = loss.dim();
    const BcFactors bc = bc_factors(kind, hp, s.synth_t);

    Vec g;
    if (kind == OptimizerKind::Nesterov) {
        Vec theta = s.w;
        axpy(-hp.eta * hp.beta1, *s.m, theta);
        g = loss.grad(theta);
    } else {
        g = loss.grad(s.w);
    }
    if (!all_finite(g)) throw DivergenceError(s.synth_t);

    StableRhs rhs;
    rhs.dw.resize(d);
    switch (kind) {
        case OptimizerKind::GD: {
            for (std::size_t i = 0; i < d; ++i) rhs.dw[i] = -hp.eta * g[i];
            break;
        }
        case OptimizerKind::ScalarRMSProp:
        case OptimizerKind::RMSProp: {
            Vec eta = detail::preconditioned_eta(hp, *s.nu, has_scalar_nu(kind), d, 1.0);
            for (std::size_t i = 0; i < d; ++i) rhs.dw[i] = -eta[i] * g[i];
            break;
        }
        case OptimizerKind::HeavyBall:
        case OptimizerKind::Nesterov: {
            const double b = hp.beta1;
            const Vec& m = *s.m;
            for (std::size_t i = 0; i < d; ++i)
                rhs.dw[i] = -hp.eta * (b * m[i] + (1.0 - b) * g[i]);
            Vec dm(d);
            for (std::size_t i = 0; i < d; ++i) dm[i] = (1.0 - b) * (g[i] - m[i]);
            rhs.dm = std::move(dm);
            break;
        }
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::Adam:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::NAdam: {
            const bool nesterov_style =
                kind == OptimizerKind::NAdam || kind == OptimizerKind::ScalarNAdam;
            const double b = hp.beta1;
            const double bm = nesterov_style ? b * b : b;
            const Vec& m = *s.m;
            Vec eta = detail::preconditioned_eta(hp, *s.nu, has_scalar_nu(kind), d, bc.bc2);
            for (std::size_t i = 0; i < d; ++i)
                rhs.dw[i] = -eta[i] * (bm * m[i] + (1.0 - bm) * g[i]) / bc.bc1;
            Vec dm(d);
            for (std::size_t i = 0; i < d; ++i) dm[i] = (1.0 - b) * (g[i] - m[i]);
            rhs.dm = std::move(dm);
            break;
        }
    }
    if (is_adaptive(kind)) {
        if (has_scalar_nu(kind)) {
            Vec dnu(1);
            dnu[0] = (1.0 - hp.beta2) * (dot(g, g) - (*s.nu)[0]);
            rhs.dnu = std::move(dnu);
        } else {
            Vec dnu(d);
            for (std::size_t i = 0; i < d; ++i)
                dnu[i] = (1.0 - hp.beta2) * (g[i] * g[i] - (*s.nu)[i]);
            rhs.dnu = std::move(dnu);
        }
    }
    return rhs;
}

// Advances the stable flow by one unit of simulated time (`substeps`
// forward-Euler steps of size dt), then bumps the synthetic counter.
inline void advance_unit_time(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                              StableState& s, const FlowConfig& cfg) {
    for (int k = 0; k < cfg.substeps; ++k) {
        StableRhs rhs = stable_rhs(kind, hp, loss, s);
        axpy(cfg.dt, rhs.dw, s.w);
        if (rhs.dm) axpy(cfg.dt, *rhs.dm, *s.m);
        if (rhs.dnu) axpy(cfg.dt, *rhs.dnu, *s.nu);
        if (!all_finite(s.w) || norm2(s.w) > 1e12) throw DivergenceError(s.synth_t);
    }
    s.synth_t += 1;
}

// Rod-flow variant: each substep also advances the extent tensor from the
// endpoint displacements. With `bea_correction` set and an Adam kind, the
// center derivatives are replaced by the second-order modified field.
inline void advance_unit_time(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                              RodState& rod, const FlowConfig& cfg) {
    const std::size_t d = loss.dim();
    for (int k = 0; k < cfg.substeps; ++k) {
        RodRhs rhs = rod_rhs(kind, hp, loss, rod);
        Vec dw = rhs.dwbar;
        std::optional<Vec> dm = rhs.dmbar;
        if (cfg.bea_correction && kind == OptimizerKind::Adam) {
            const Vec delta = rod.extent.principal_delta();
            auto corr = bea::adam_center_correction(hp, loss, rod.wbar, *rod.mbar, *rod.nubar,
                                                    std::span<const double>(delta).subspan(0, d),
                                                    rod.synth_t);
            dw = std::move(corr.dwbar);
            dm = std::move(corr.dmbar);
        }
        axpy(cfg.dt, dw, rod.wbar);
        if (dm) axpy(cfg.dt, *dm, *rod.mbar);
        if (rhs.dnubar) axpy(cfg.dt, *rhs.dnubar, *rod.nubar);
        rod.extent.update(rhs.phi_plus, rhs.phi_minus, cfg.dt);
        if (!all_finite(rod.wbar) || norm2(rod.wbar) > 1e12) throw DivergenceError(rod.synth_t);
    }
    rod.synth_t += 1;
}

}  // namespace rodflow
