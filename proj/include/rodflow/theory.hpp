#pragma once

#include <complex>
#include <optional>

#include "rodflow/linalg.hpp"
#include "rodflow/optim.hpp"

namespace rodflow::theory {

// Predicted self-stabilization threshold for the preconditioned sharpness.
// epsilon is treated as zero throughout this module.
inline double threshold(OptimizerKind kind, double eta, double beta1 = 0.0) {
    const double base = 2.0 / eta;
    switch (kind) {
        case OptimizerKind::GD:
        case OptimizerKind::ScalarRMSProp:
        case OptimizerKind::RMSProp:
            return base;
        case OptimizerKind::HeavyBall:
        case OptimizerKind::ScalarAdam:
        case OptimizerKind::Adam:
            return base * (1.0 + beta1) / (1.0 - beta1);
        case OptimizerKind::Nesterov:
        case OptimizerKind::ScalarNAdam:
        case OptimizerKind::NAdam:
            return base * (1.0 + beta1) / ((1.0 - beta1) * (1.0 + 2.0 * beta1));
    }
    return base;
}

struct RecurrenceEigs {
    std::complex<double> lambda1, lambda2;      // |lambda1| >= |lambda2|
    std::complex<double> v1[2], v2[2];          // eigenvectors of the 2x2 transition matrix
    double trace, det;
};

inline RecurrenceEigs solve_two_step(double trace, double det) {
    RecurrenceEigs r;
    r.trace = trace;
    r.det = det;
    const std::complex<double> disc = std::sqrt(std::complex<double>(trace * trace - 4.0 * det, 0.0));
    r.lambda1 = 0.5 * (trace + disc);
    r.lambda2 = 0.5 * (trace - disc);
    if (std::abs(r.lambda2) > std::abs(r.lambda1)) std::swap(r.lambda1, r.lambda2);
    // companion-form eigenvectors: M (lambda, 1)^T = lambda (lambda, 1)^T
    r.v1[0] = r.lambda1; r.v1[1] = 1.0;
    r.v2[0] = r.lambda2; r.v2[1] = 1.0;
    return r;
}

// Eigenstructure of the heavy-ball two-step recurrence on the quadratic:
//   w_{t+1} = (1 + beta - eta(1-beta)S) w_t - beta w_{t-1}
inline RecurrenceEigs hb_recurrence_eigs(double eta, double beta, double S) {
    return solve_two_step(1.0 + beta - eta * (1.0 - beta) * S, beta);
}

//   w_{t+1} = (1 + beta - eta(1-beta^2)S) w_t - beta(1 - eta(1-beta)S) w_{t-1}
inline RecurrenceEigs nesterov_recurrence_eigs(double eta, double beta, double S) {
    return solve_two_step(1.0 + beta - eta * (1.0 - beta * beta) * S,
                          beta * (1.0 - eta * (1.0 - beta) * S));
}

// Asymptotic 2-cycle amplitude |w_inf| = |c1| at S = S*(kind).
inline double asymptotic_amplitude(OptimizerKind kind, double w0, double m0, double eta,
                                   double beta) {
    if (kind == OptimizerKind::HeavyBall)
        return std::abs(((1.0 + beta) * w0 + beta * eta * m0) / (1.0 - beta));
    if (kind == OptimizerKind::Nesterov)
        return std::abs(((1.0 + beta) * w0 - beta * eta * m0) / (1.0 + 3.0 * beta));
    throw std::invalid_argument("asymptotic_amplitude: kind must be HeavyBall or Nesterov");
}

struct QuarticFixedPoint {
    double sigma_dd = 0.0;        // (S - S*) / Q
    double sigma_gg = 0.0;        // momentum kinds only
    double sigma_dg = 0.0;
    double gamma_over_delta = 0.0;  // -2/eta for momentum kinds
};

// Nontrivial rod-flow fixed point on the 1-D quartic; empty when S <= S*.
// The average curvature over the rod equals the threshold at the fixed
// point. For Nesterov the gradient is sampled at the look-ahead rod, whose
// half-displacement is phi = (1 + 2 beta) delta, so the position amplitude
// shrinks by that factor relative to the heavy-ball expression.
inline std::optional<QuarticFixedPoint> quartic_fixed_point(OptimizerKind kind, double eta,
                                                            double beta, double S, double Q) {
    const double s_star = threshold(kind, eta, beta);
    if (S <= s_star) return std::nullopt;
    QuarticFixedPoint fp;
    fp.sigma_dd = (S - s_star) / Q;
    if (kind == OptimizerKind::Nesterov) {
        const double lookahead = 1.0 + 2.0 * beta;
        fp.sigma_dd /= lookahead * lookahead;
    }
    if (kind == OptimizerKind::HeavyBall || kind == OptimizerKind::Nesterov) {
        fp.sigma_gg = 4.0 * fp.sigma_dd / (eta * eta);
        fp.sigma_dg = -2.0 * fp.sigma_dd / eta;
        fp.gamma_over_delta = -2.0 / eta;
    }
    return fp;
}

struct AdaptiveFixedPoint {
    double delta;   // steady-state position half-displacement
    double nu;      // steady-state second moment
    std::optional<double> gamma;  // momentum half-displacement (Adam only)
};

// Steady-state oscillation on the 1-D quadratic with epsilon = 0.
inline AdaptiveFixedPoint adaptive_fixed_points(OptimizerKind kind, double eta, double beta1,
                                                double S) {
    AdaptiveFixedPoint fp{};
    if (kind == OptimizerKind::RMSProp || kind == OptimizerKind::ScalarRMSProp) {
        fp.delta = 0.5 * eta;
        fp.nu = S * S * fp.delta * fp.delta;
        return fp;
    }
    if (kind == OptimizerKind::Adam || kind == OptimizerKind::ScalarAdam) {
        const double ratio = (1.0 - beta1) / (1.0 + beta1);
        fp.delta = 0.5 * eta * ratio;
        fp.nu = S * S * fp.delta * fp.delta;
        fp.gamma = -ratio * S * fp.delta;
        return fp;
    }
    throw std::invalid_argument("adaptive_fixed_points: kind must be RMSProp or Adam");
}

struct JacobianVerdict {
    double trace;
    double det;
    bool stable;
};

// Jacobian of the (Sigma, nu) subsystem at the RMSProp quadratic fixed point.
inline JacobianVerdict rmsprop_quadratic_jacobian(double /*eta*/, double beta2, double /*S*/) {
    JacobianVerdict v;
    v.trace = -(1.0 - beta2);
    v.det = 2.0 * (1.0 - beta2);
    v.stable = v.trace < 0.0 && v.det > 0.0;
    return v;
}

// Routh-Hurwitz verdict for the on-cone perturbation polynomial of the
// heavy-ball quartic fixed point:
//   nu^2 + [2 eta (1-beta) S - 3 - 5 beta] nu + 2 eta (1-beta)(S - S*) = 0
inline bool hb_quartic_oncone_stability(double eta, double beta, double S) {
    const double s_star = threshold(OptimizerKind::HeavyBall, eta, beta);
    const double c1 = 2.0 * eta * (1.0 - beta) * S - 3.0 - 5.0 * beta;
    const double c0 = 2.0 * eta * (1.0 - beta) * (S - s_star);
    return c1 > 0.0 && c0 > 0.0;
}

}  // namespace rodflow::theory
