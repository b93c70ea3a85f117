#pragma once

#include <optional>
#include <string>

#include "rodflow/linalg.hpp"
#include "rodflow/losses.hpp"

namespace rodflow {

enum class OptimizerKind {
    GD,
    HeavyBall,
    Nesterov,
    ScalarRMSProp,
    RMSProp,
    ScalarAdam,
    ScalarNAdam,
    Adam,
    NAdam,
};

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::GD: return "gd";
        case OptimizerKind::HeavyBall: return "heavy_ball";
        case OptimizerKind::Nesterov: return "nesterov";
        case OptimizerKind::ScalarRMSProp: return "scalar_rmsprop";
        case OptimizerKind::RMSProp: return "rmsprop";
        case OptimizerKind::ScalarAdam: return "scalar_adam";
        case OptimizerKind::ScalarNAdam: return "scalar_nadam";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::NAdam: return "nadam";
    }
    return "?";
}

inline std::optional<OptimizerKind> optimizer_kind_from_string(const std::string& s) {
    for (auto k : {OptimizerKind::GD, OptimizerKind::HeavyBall, OptimizerKind::Nesterov,
                   OptimizerKind::ScalarRMSProp, OptimizerKind::RMSProp, OptimizerKind::ScalarAdam,
                   OptimizerKind::ScalarNAdam, OptimizerKind::Adam, OptimizerKind::NAdam})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

inline bool has_momentum(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::HeavyBall:
        case OptimizerKind::Nesterov:
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::Adam:
        case OptimizerKind::NAdam:
            return true;
        default:
            return false;
    }
}

inline bool is_adaptive(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::ScalarRMSProp:
        case OptimizerKind::RMSProp:
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::Adam:
        case OptimizerKind::NAdam:
            return true;
        default:
            return false;
    }
}

inline bool has_scalar_nu(OptimizerKind k) {
    return k == OptimizerKind::ScalarRMSProp || k == OptimizerKind::ScalarAdam ||
           k == OptimizerKind::ScalarNAdam;
}

// Bias correction is a property of the kind: on for the Adam family,
// off for GD, momentum, and the RMSProp variants.
inline bool uses_bias_correction(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::Adam:
        case OptimizerKind::NAdam:
            return true;
        default:
            return false;
    }
}

struct HyperParams {
    double eta = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(eta > 0.0)) throw std::invalid_argument("hyperparams: eta must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0))
            throw std::invalid_argument("hyperparams: beta1 must be in [0,1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("hyperparams: beta2 must be in [0,1)");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("hyperparams: epsilon must be >= 0");
    }
};

struct DivergenceError : std::runtime_error {
    long long t;
    explicit DivergenceError(long long t_)
        : std::runtime_error("trajectory diverged at t=" + std::to_string(t_)), t(t_) {}
};

struct OptimizerState {
    Vec w;
    std::optional<Vec> m;
    std::optional<Vec> nu;  // size 1 for scalar kinds, size d otherwise
    long long t = 0;
};

inline OptimizerState make_initial_state(OptimizerKind kind, Vec w0) {
    OptimizerState s;
    const std::size_t d = w0.size();
    s.w = std::move(w0);
    if (has_momentum(kind)) s.m = Vec(d, 0.0);
    if (is_adaptive(kind)) s.nu = Vec(has_scalar_nu(kind) ? 1 : d, 0.0);
    s.t = 0;
    return s;
}

namespace detail {

inline void check_divergence(const OptimizerState& s) {
    if (!all_finite(s.w) || norm2(s.w) > 1e12) throw DivergenceError(s.t);
    if (s.m && !all_finite(*s.m)) throw DivergenceError(s.t);
    if (s.nu && !all_finite(*s.nu)) throw DivergenceError(s.t);
}

}  // namespace detail

// One discrete step, EMA parameterization throughout. `state.t` is the index
// of the incoming state; the returned state carries t+1.
inline OptimizerState step(OptimizerKind kind, const HyperParams& hp, const LossFn& loss,
                           const OptimizerState& state) {
    const std::size_t d = loss.dim();
    if (state.w.size() != d) throw DimensionError("step: state dimension mismatch");
    OptimizerState next = state;
    next.t = state.t + 1;

    Vec g;
    switch (kind) {
        case OptimizerKind::GD: {
            g = loss.grad(state.w);
            if (!all_finite(g)) throw DivergenceError(state.t);
            axpy(-hp.eta, g, next.w);
            break;
        }
        case OptimizerKind::HeavyBall:
        case OptimizerKind::Nesterov: {
            if (kind == OptimizerKind::Nesterov) {
                Vec theta = state.w;
                axpy(-hp.eta * hp.beta1, *state.m, theta);
                g = loss.grad(theta);
            } else {
                g = loss.grad(state.w);
            }
            if (!all_finite(g)) throw DivergenceError(state.t);
            Vec& m = *next.m;
            for (std::size_t i = 0; i < d; ++i)
                m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            axpy(-hp.eta, m, next.w);
            break;
        }
        case OptimizerKind::ScalarRMSProp:
        case OptimizerKind::RMSProp: {
            g = loss.grad(state.w);
            if (!all_finite(g)) throw DivergenceError(state.t);
            Vec& nu = *next.nu;
            if (kind == OptimizerKind::ScalarRMSProp) {
                nu[0] = hp.beta2 * nu[0] + (1.0 - hp.beta2) * dot(g, g);
                const double step_size = hp.eta / (std::sqrt(nu[0]) + hp.epsilon);
                axpy(-step_size, g, next.w);
            } else {
                for (std::size_t i = 0; i < d; ++i) {
                    nu[i] = hp.beta2 * nu[i] + (1.0 - hp.beta2) * g[i] * g[i];
                    next.w[i] -= hp.eta / (std::sqrt(nu[i]) + hp.epsilon) * g[i];
                }
            }
            break;
        }
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::Adam:
        case OptimizerKind::NAdam: {
            g = loss.grad(state.w);
            if (!all_finite(g)) throw DivergenceError(state.t);
            Vec& m = *next.m;
            Vec& nu = *next.nu;
            const bool nesterov_style =
                kind == OptimizerKind::NAdam || kind == OptimizerKind::ScalarNAdam;
            const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t + 1));
            const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t + 1));
            for (std::size_t i = 0; i < d; ++i)
                m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            if (has_scalar_nu(kind))
                nu[0] = hp.beta2 * nu[0] + (1.0 - hp.beta2) * dot(g, g);
            else
                for (std::size_t i = 0; i < d; ++i)
                    nu[i] = hp.beta2 * nu[i] + (1.0 - hp.beta2) * g[i] * g[i];
            for (std::size_t i = 0; i < d; ++i) {
                // NAdam substitutes the modified momentum beta1*m_{t+1} + (1-beta1)*g_t
                const double numer = nesterov_style
                                         ? (hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i]) / bc1
                                         : m[i] / bc1;
                const double nu_i = has_scalar_nu(kind) ? nu[0] : nu[i];
                const double denom = std::sqrt(nu_i / bc2) + hp.epsilon;
                next.w[i] -= hp.eta * numer / denom;
            }
            break;
        }
    }
    detail::check_divergence(next);
    return next;
}

// Runs pure Nesterov from (w0, m0) and Dozat's preconditioner-free update
// from theta0 = w0 - eta*beta*m0, returning the max deviation between the
// Nesterov look-ahead points and the Dozat iterates over T steps.
inline double nadam_as_nesterov_check(const HyperParams& hp, const LossFn& loss, const Vec& w0,
                                      const Vec& m0, int T) {
    const std::size_t d = loss.dim();
    const double beta = hp.beta1;
    Vec w = w0, m_nest = m0;
    Vec theta_dozat = w0;
    axpy(-hp.eta * beta, m0, theta_dozat);
    Vec m_dozat = m0;

    double max_dev = 0.0;
    for (int t = 0; t <= T; ++t) {
        Vec theta_nest = w;
        axpy(-hp.eta * beta, m_nest, theta_nest);
        max_dev = std::max(max_dev, dist(theta_nest, theta_dozat));
        if (t == T) break;

        // Nesterov step
        Vec g = loss.grad(theta_nest);
        for (std::size_t i = 0; i < d; ++i)
            m_nest[i] = beta * m_nest[i] + (1.0 - beta) * g[i];
        axpy(-hp.eta, m_nest, w);

        // Dozat step: w <- w - eta [beta^2 m + (1-beta^2) g(w)]
        Vec gd = loss.grad(theta_dozat);
        for (std::size_t i = 0; i < d; ++i) {
            const double upd = beta * beta * m_dozat[i] + (1.0 - beta * beta) * gd[i];
            m_dozat[i] = beta * m_dozat[i] + (1.0 - beta) * gd[i];
            theta_dozat[i] -= hp.eta * upd;
        }
    }
    return max_dev;
}

}  // namespace rodflow
