#pragma once

#include <functional>

#include "rodflow/linalg.hpp"
#include "rodflow/losses.hpp"
#include "rodflow/optim.hpp"

namespace rodflow::bea {

using VecField = std::function<Vec(std::span<const double>)>;
using Jvp = std::function<Vec(std::span<const double>, std::span<const double>)>;

// Central-difference directional derivative of a vector field.
inline Jvp fd_jvp(const VecField& f) {
    return [f](std::span<const double> x, std::span<const double> v) {
        const std::size_t n = x.size();
        const double vn = norm2(v);
        if (vn == 0.0) return Vec(n, 0.0);
        const double h = std::cbrt(2.220446049250313e-16) * (1.0 + norm2(x)) / vn;
        Vec xp(x.begin(), x.end()), xm(x.begin(), x.end());
        axpy(h, v, xp);
        axpy(-h, v, xm);
        Vec fp = f(xp), fm = f(xm);
        Vec r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = (fp[i] - fm[i]) / (2.0 * h);
        return r;
    };
}

struct ModifiedField {
    int order = 1;
    VecField eval;
};

// Truncated modified vector field for the discrete update x' = x + D(x):
//   V1 = D
//   V2 = -1/2 (grad D) D
//   V3 = -1/2 (grad D) V2 - 1/6 (grad V2) D
inline ModifiedField modified_field_generic(VecField D, Jvp jvp_of_D, int order) {
    if (order < 1 || order > 3)
        throw std::invalid_argument("modified_field_generic: order must be 1, 2 or 3");
    if (!jvp_of_D) jvp_of_D = fd_jvp(D);

    auto v2 = [D, jvp_of_D](std::span<const double> x) {
        Vec d = D(x);
        Vec r = jvp_of_D(x, d);
        scale(r, -0.5);
        return r;
    };

    ModifiedField mf;
    mf.order = order;
    if (order == 1) {
        mf.eval = D;
        return mf;
    }
    if (order == 2) {
        mf.eval = [D, v2](std::span<const double> x) {
            Vec r = D(x);
            Vec t = v2(x);
            axpy(1.0, t, r);
            return r;
        };
        return mf;
    }
    VecField v2f = v2;
    Jvp jvp_of_v2 = fd_jvp(v2f);
    mf.eval = [D, jvp_of_D, v2f, jvp_of_v2](std::span<const double> x) {
        Vec d = D(x);
        Vec t2 = v2f(x);
        Vec t3a = jvp_of_D(x, t2);
        Vec t3b = jvp_of_v2(x, d);
        Vec r = d;
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] += t2[i] - 0.5 * t3a[i] - (1.0 / 6.0) * t3b[i];
        return r;
    };
    return mf;
}

struct CenterCorrection {
    Vec dwbar;
    Vec dmbar;
};

// Second-order correction D - 1/2 (grad D) D for the Adam rod-flow center
// dynamics. The Jacobian blocks are affine in the averaged endpoint Hessian,
// so (grad D) D assembles from two HVP calls and vector algebra; the extent
// and second-moment dynamics are left uncorrected (they evolve on separated
// timescales).
inline CenterCorrection adam_center_correction(const HyperParams& hp, const LossFn& loss,
                                               std::span<const double> wbar,
                                               std::span<const double> mbar,
                                               std::span<const double> nubar,
                                               std::span<const double> delta, long long synth_t) {
    const std::size_t d = loss.dim();
    const double b1 = hp.beta1;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(synth_t + 1));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(synth_t + 1));

    Vec wp(wbar.begin(), wbar.end()), wm(wbar.begin(), wbar.end());
    axpy(1.0, delta, wp);
    axpy(-1.0, delta, wm);
    Vec gp = loss.grad(wp);
    Vec gm = loss.grad(wm);

    const bool scalar_nu = nubar.size() == 1;
    Vec eta(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double nu_i = scalar_nu ? nubar[0] : nubar[i];
        eta[i] = hp.eta / (std::sqrt(nu_i / bc2) + hp.epsilon);
    }

    Vec d_w(d), d_m(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double gbar = 0.5 * (gp[i] + gm[i]);
        d_w[i] = -eta[i] * (b1 * mbar[i] + (1.0 - b1) * gbar) / bc1;
        d_m[i] = (1.0 - b1) * (gbar - mbar[i]);
    }

    // Hbar D_w via the endpoint Hessians
    Vec hp_dw = loss.hvp(wp, d_w);
    Vec hm_dw = loss.hvp(wm, d_w);

    CenterCorrection out;
    out.dwbar.resize(d);
    out.dmbar.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double h_dw = 0.5 * (hp_dw[i] + hm_dw[i]);
        const double grad_dd_w = -eta[i] * ((1.0 - b1) * h_dw + b1 * d_m[i]) / bc1;
        const double grad_dd_m = (1.0 - b1) * (h_dw - d_m[i]);
        out.dwbar[i] = d_w[i] - 0.5 * grad_dd_w;
        out.dmbar[i] = d_m[i] - 0.5 * grad_dd_m;
    }
    return out;
}

}  // namespace rodflow::bea
