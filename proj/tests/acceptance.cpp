// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <vector>

#include "rodflow/eigs.hpp"
#include "rodflow/harness.hpp"
#include "rodflow/plot.hpp"
#include "rodflow/theory.hpp"

using namespace rodflow;

namespace {

struct Criterion {
    int number;
    std::string title;
    std::function<std::optional<std::string>()> run;
    double time_limit_s = 0.0;  // 0 = unconstrained
};

std::optional<std::string> ok() { return std::nullopt; }

std::optional<std::string> fail(const std::string& msg) { return msg; }

bool close_rel(double got, double want, double rel) {
    return std::abs(got - want) <= rel * std::abs(want);
}

std::string describe(double got, double want) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "got %.10g, want %.10g (rel err %.3g)", got, want,
                  std::abs(got - want) / std::max(1e-300, std::abs(want)));
    return buf;
}

// ---------------------------------------------------------------- criterion 1
std::optional<std::string> threshold_table() {
    struct Row {
        OptimizerKind kind;
        double eta, beta, want;
    };
    const double eta = 0.05, beta = 0.4;
    const Row rows[] = {
        {OptimizerKind::GD, eta, 0.0, 2.0 / eta},
        {OptimizerKind::HeavyBall, eta, beta, 2.0 / eta * 1.4 / 0.6},
        {OptimizerKind::Nesterov, eta, beta, 2.0 / eta * 1.4 / (0.6 * 1.8)},
        {OptimizerKind::ScalarRMSProp, eta, 0.0, 2.0 / eta},
        {OptimizerKind::RMSProp, eta, 0.0, 2.0 / eta},
        {OptimizerKind::ScalarAdam, eta, beta, 2.0 / eta * 1.4 / 0.6},
        {OptimizerKind::Adam, eta, beta, 2.0 / eta * 1.4 / 0.6},
        {OptimizerKind::ScalarNAdam, eta, beta, 2.0 / eta * 1.4 / (0.6 * 1.8)},
        {OptimizerKind::NAdam, eta, beta, 2.0 / eta * 1.4 / (0.6 * 1.8)},
    };
    for (const auto& r : rows) {
        const double got = theory::threshold(r.kind, r.eta, r.beta);
        if (!close_rel(got, r.want, 1e-12))
            return fail(std::string(to_string(r.kind)) + " formula: " + describe(got, r.want));
    }

    // simulation cross-check on the 1-d quadratic for the non-adaptive kinds
    for (auto kind : {OptimizerKind::GD, OptimizerKind::HeavyBall, OptimizerKind::Nesterov}) {
        HyperParams hp;
        hp.eta = eta;
        hp.beta1 = kind == OptimizerKind::GD ? 0.0 : beta;
        const double s_star = theory::threshold(kind, hp.eta, hp.beta1);

        auto simulate = [&](double S) -> std::pair<bool, double> {
            auto loss = LossFn::quadratic(S, 1);
            auto s = make_initial_state(kind, Vec{1.0});
            for (int t = 0; t < 50000; ++t) {
                try {
                    s = step(kind, hp, loss, s);
                } catch (const DivergenceError&) {
                    return {true, 0.0};
                }
            }
            return {false, std::abs(s.w[0])};
        };

        auto [diverged_above, unused] = simulate(1.02 * s_star);
        if (!diverged_above)
            return fail(std::string(to_string(kind)) + " did not diverge at S = 1.02 S*");
        auto [diverged_below, final_amp] = simulate(0.98 * s_star);
        if (diverged_below)
            return fail(std::string(to_string(kind)) + " diverged at S = 0.98 S*");
        if (final_amp > 10.0)
            return fail(std::string(to_string(kind)) + " failed to converge or cycle below S*");
    }
    return ok();
}

// ---------------------------------------------------------------- criterion 2
std::optional<std::string> two_cycle_amplitudes() {
    const double eta = 0.05;
    for (double beta : {0.2, 0.5, 0.8}) {
        HyperParams hp;
        hp.eta = eta;
        hp.beta1 = beta;
        const int n_steps = static_cast<int>(std::ceil(std::log(1e-8) / std::log(beta))) + 8;
        for (auto kind : {OptimizerKind::HeavyBall, OptimizerKind::Nesterov}) {
            const double s_star = theory::threshold(kind, eta, beta);
            auto loss = LossFn::quadratic(s_star, 1);
            auto s = make_initial_state(kind, Vec{1.0});
            for (int t = 0; t < n_steps; ++t) s = step(kind, hp, loss, s);
            const double want = theory::asymptotic_amplitude(kind, 1.0, 0.0, eta, beta);
            const double got = std::abs(s.w[0]);
            if (!close_rel(got, want, 1e-6))
                return fail(std::string(to_string(kind)) + " beta=" + std::to_string(beta) +
                            ": " + describe(got, want));
        }
    }
    return ok();
}

// ---------------------------------------------------------------- criterion 3
std::optional<std::string> quartic_fixed_points() {
    struct Case {
        OptimizerKind kind;
        double eta, beta;
    };
    const Case cases[] = {{OptimizerKind::GD, 0.1, 0.0},
                          {OptimizerKind::HeavyBall, 0.1, 0.4},
                          {OptimizerKind::Nesterov, 0.1, 0.4}};
    const double Q = 1.0;
    for (const auto& c : cases) {
        const double s_star = theory::threshold(c.kind, c.eta, c.beta);
        const double S = 1.5 * s_star;
        const double sigma_dd_want = theory::quartic_fixed_point(c.kind, c.eta, c.beta, S, Q)->sigma_dd;
        // gd and heavy ball carry the plain average-curvature expression;
        // nesterov's position amplitude is reduced by the look-ahead factor
        if (c.kind != OptimizerKind::Nesterov && !close_rel(sigma_dd_want, (S - s_star) / Q, 1e-12))
            return fail("fixed-point oracle mismatch");
        auto loss = LossFn::quartic(S, Q, 1);
        HyperParams hp;
        hp.eta = c.eta;
        hp.beta1 = c.beta;
        FlowConfig cfg;

        const bool momentum = c.kind != OptimizerKind::GD;
        RodState rod{Vec{0.0},
                     momentum ? std::optional<Vec>(Vec{0.0}) : std::nullopt,
                     std::nullopt,
                     Extent::dense(momentum ? 2 : 1),
                     0};
        const double delta0 = 0.2 * std::sqrt(sigma_dd_want);
        if (momentum)
            rod.extent.seed_rank_one(Vec{delta0, -2.0 / c.eta * delta0});
        else
            rod.extent.seed_rank_one(Vec{delta0});
        for (int t = 0; t < 400; ++t) advance_unit_time(c.kind, hp, loss, rod, cfg);

        const double sigma_dd = rod.extent.entry(0, 0);
        if (!close_rel(sigma_dd, sigma_dd_want, 0.01))
            return fail(std::string(to_string(c.kind)) +
                        " sigma_dd: " + describe(sigma_dd, sigma_dd_want));
        if (momentum) {
            const Vec delta = rod.extent.principal_delta();
            const double ratio = delta[1] / delta[0];
            if (!close_rel(ratio, -2.0 / c.eta, 0.01))
                return fail(std::string(to_string(c.kind)) +
                            " gamma/delta: " + describe(ratio, -2.0 / c.eta));
        }

        // discrete 2-cycle half-amplitude vs sqrt(sigma_dd)
        auto s = make_initial_state(c.kind, Vec{0.5 * std::sqrt(sigma_dd_want)});
        for (int t = 0; t < 20000; ++t) s = step(c.kind, hp, loss, s);
        double prev_w = s.w[0], amp_sum = 0.0;
        const int window = 2000;
        for (int t = 0; t < window; ++t) {
            s = step(c.kind, hp, loss, s);
            amp_sum += 0.5 * std::abs(s.w[0] - prev_w);
            prev_w = s.w[0];
        }
        const double amp = amp_sum / window;
        if (!close_rel(amp, std::sqrt(sigma_dd_want), 0.05))
            return fail(std::string(to_string(c.kind)) +
                        " discrete amplitude: " + describe(amp, std::sqrt(sigma_dd_want)));
    }
    return ok();
}

// ---------------------------------------------------------------- criterion 4
std::optional<std::string> rmsprop_quadratic() {
    const double eta = 1e-3, S = 10.0, beta2 = 0.99;
    auto loss = LossFn::quadratic(S, 1);
    HyperParams hp;
    hp.eta = eta;
    hp.beta2 = beta2;
    hp.epsilon = 0.0;
    FlowConfig cfg;
    const double nu_want = S * S * eta * eta / 4.0;
    const double delta_want = eta / 2.0;

    RodState rod{Vec{0.0}, std::nullopt, Vec{0.5 * nu_want}, Extent::dense(1), 0};
    rod.extent.seed_rank_one(Vec{0.5 * delta_want});
    for (int t = 0; t < 4000; ++t) advance_unit_time(OptimizerKind::RMSProp, hp, loss, rod, cfg);

    const double delta_got = std::sqrt(rod.extent.entry(0, 0));
    if (!close_rel(delta_got, delta_want, 1e-4))
        return fail("delta*: " + describe(delta_got, delta_want));
    const double nu_got = (*rod.nubar)[0];
    if (!close_rel(nu_got, nu_want, 1e-4)) return fail("nu*: " + describe(nu_got, nu_want));

    eigs::LanczosSolver solver;
    const double sharp =
        eigs::preconditioned_sharpness(loss, rod.wbar, *rod.nubar, hp, solver);
    if (!close_rel(sharp, 2.0 / eta, 0.005))
        return fail("preconditioned sharpness: " + describe(sharp, 2.0 / eta));
    return ok();
}

// ---------------------------------------------------------------- criterion 5
std::optional<std::string> adam_quadratic() {
    // small momentum keeps the rod's oscillation/second-moment relaxation a
    // genuine attractor; at larger beta1 the desk-scale rod orbits the fixed
    // point instead of settling on it
    const double eta = 1e-3, S = 10.0, beta1 = 0.1, beta2 = 0.9;
    auto fp = theory::adaptive_fixed_points(OptimizerKind::Adam, eta, beta1, S);
    auto rms = theory::adaptive_fixed_points(OptimizerKind::RMSProp, eta, 0.0, S);

    // beta1 = 0.9 amplitude ratio against rmsprop
    auto fp9 = theory::adaptive_fixed_points(OptimizerKind::Adam, eta, 0.9, S);
    const double ratio = fp9.delta / rms.delta;
    if (std::abs(ratio - 1.0 / 19.0) > 1e-6)
        return fail("beta1=0.9 amplitude ratio: " + describe(ratio, 1.0 / 19.0));

    auto loss = LossFn::quadratic(S, 1);
    HyperParams hp;
    hp.eta = eta;
    hp.beta1 = beta1;
    hp.beta2 = beta2;
    hp.epsilon = 0.0;
    FlowConfig cfg;
    // matured synthetic counter: the flows are warm-started in practice, and
    // cold bias-correction factors would crush the early extent dynamics
    RodState rod{Vec{0.0}, Vec{0.0}, Vec{0.8 * fp.nu}, Extent::dense(2), 5000};
    rod.extent.seed_rank_one(Vec{0.8 * fp.delta, 0.8 * *fp.gamma});
    for (int t = 0; t < 6000; ++t) advance_unit_time(OptimizerKind::Adam, hp, loss, rod, cfg);

    const Vec delta = rod.extent.principal_delta();
    const double delta_got = std::abs(delta[0]);
    const double gamma_got = delta[0] > 0 ? delta[1] : -delta[1];
    if (!close_rel(delta_got, fp.delta, 1e-3))
        return fail("delta*: " + describe(delta_got, fp.delta));
    const double nu_got = (*rod.nubar)[0];
    if (!close_rel(nu_got, fp.nu, 1e-3)) return fail("nu*: " + describe(nu_got, fp.nu));
    if (!close_rel(gamma_got, *fp.gamma, 1e-3))
        return fail("gamma*: " + describe(gamma_got, *fp.gamma));
    return ok();
}

// ---------------------------------------------------------------- criterion 6
std::optional<std::string> linear_sign_gd() {
    const double b = 2.0, eta = 0.01, beta2 = 0.99;
    auto loss = LossFn::linear(Vec{b});
    FlowConfig cfg;

    // rmsprop
    {
        HyperParams hp;
        hp.eta = eta;
        hp.beta2 = beta2;
        hp.epsilon = 0.0;
        RodState rod{Vec{0.0}, std::nullopt, Vec{0.5 * b * b}, Extent::dense(1), 0};
        rod.extent.seed_rank_one(Vec{0.1 * eta});
        for (int t = 0; t < 3000; ++t)
            advance_unit_time(OptimizerKind::RMSProp, hp, loss, rod, cfg);
        auto rhs = rod_rhs(OptimizerKind::RMSProp, hp, loss, rod);
        if (!close_rel(rhs.dwbar[0], -eta, 1e-6))
            return fail("rmsprop dwbar: " + describe(rhs.dwbar[0], -eta));
        if (!close_rel(rod.extent.entry(0, 0), eta * eta / 4.0, 1e-6))
            return fail("rmsprop sigma: " + describe(rod.extent.entry(0, 0), eta * eta / 4.0));
    }
    // adam (bias-corrected; run long enough for the corrections to die off)
    {
        HyperParams hp;
        hp.eta = eta;
        hp.beta1 = 0.5;
        hp.beta2 = beta2;
        hp.epsilon = 0.0;
        RodState rod{Vec{0.0}, Vec{0.5 * b}, Vec{0.5 * b * b}, Extent::dense(2), 0};
        rod.extent.seed_rank_one(Vec{0.1 * eta, 0.0});
        for (int t = 0; t < 3000; ++t)
            advance_unit_time(OptimizerKind::Adam, hp, loss, rod, cfg);
        auto rhs = rod_rhs(OptimizerKind::Adam, hp, loss, rod);
        if (!close_rel(rhs.dwbar[0], -eta, 1e-6))
            return fail("adam dwbar: " + describe(rhs.dwbar[0], -eta));
        if (!close_rel(rod.extent.entry(0, 0), eta * eta / 4.0, 1e-6))
            return fail("adam sigma: " + describe(rod.extent.entry(0, 0), eta * eta / 4.0));
    }
    return ok();
}

// ---------------------------------------------------------------- criterion 7
std::optional<std::string> exact_difference() {
    Rng rng(1234);
    const std::size_t d = 10;

    // gd on a random 10-d quartic mixture
    {
        Vec s(d), q(d);
        for (auto& x : s) x = rng.uniform(2.0, 26.0);  // 2/eta = 20: some above
        for (auto& x : q) x = rng.uniform(0.8, 1.6);
        auto loss = LossFn::diag_quartic(s, q);
        HyperParams hp;
        hp.eta = 0.1;
        auto st = make_initial_state(OptimizerKind::GD, rng.uniform_vec(d, 0.05, 0.25));
        auto nxt = step(OptimizerKind::GD, hp, loss, st);
        for (int t = 0; t < 1000; ++t) {
            Vec wbar(d), delta(d);
            for (std::size_t i = 0; i < d; ++i) {
                wbar[i] = 0.5 * (st.w[i] + nxt.w[i]);
                delta[i] = 0.5 * (nxt.w[i] - st.w[i]);
            }
            auto after = step(OptimizerKind::GD, hp, loss, nxt);
            Vec gp = loss.grad(add(wbar, delta));
            Vec gm = loss.grad(sub(wbar, delta));
            Vec dn(d);
            for (std::size_t j = 0; j < d; ++j) dn[j] = 0.5 * (after.w[j] - nxt.w[j]);
            for (std::size_t i = 0; i < d; ++i) {
                const double lhs = 0.5 * (after.w[i] + nxt.w[i]) - wbar[i];
                const double rhs = -0.5 * hp.eta * (gp[i] + gm[i]);
                // residuals are relative to the magnitudes entering the
                // recurrence, not the (cancellation-prone) net difference
                const double cscale = 1.0 + std::abs(rhs) + hp.eta * (std::abs(gp[i]) + std::abs(gm[i]));
                if (std::abs(lhs - rhs) > 1e-12 * cscale)
                    return fail("gd center recurrence residual at t=" + std::to_string(t));
                const double lhs_ext = dn[i] * dn[i] - delta[i] * delta[i];
                const double rhs_ext =
                    0.25 * hp.eta * hp.eta * (gp[i] * gp[i] + gm[i] * gm[i]) -
                    2.0 * delta[i] * delta[i];
                const double escale = 1.0 + dn[i] * dn[i] + delta[i] * delta[i];
                if (std::abs(lhs_ext - rhs_ext) > 1e-12 * escale)
                    return fail("gd extent recurrence residual at t=" + std::to_string(t));
            }
            st = std::move(nxt);
            nxt = std::move(after);
        }
    }

    // momentum kinds in phase space
    for (auto kind : {OptimizerKind::HeavyBall, OptimizerKind::Nesterov}) {
        Vec s(d), q(d);
        const double beta = 0.4;
        HyperParams hp;
        hp.eta = 0.05;
        hp.beta1 = beta;
        const double s_star = theory::threshold(kind, hp.eta, beta);
        for (auto& x : s) x = rng.uniform(0.1 * s_star, 1.2 * s_star);
        for (auto& x : q) x = rng.uniform(0.8, 1.6);
        auto loss = LossFn::diag_quartic(s, q);
        auto st = make_initial_state(kind, rng.uniform_vec(d, 0.02, 0.1));
        auto nxt = step(kind, hp, loss, st);
        for (int t = 0; t < 1000; ++t) {
            Vec z0 = st.w, z1 = nxt.w;
            z0.insert(z0.end(), st.m->begin(), st.m->end());
            z1.insert(z1.end(), nxt.m->begin(), nxt.m->end());
            Vec zbar(2 * d), delta(2 * d);
            for (std::size_t i = 0; i < 2 * d; ++i) {
                zbar[i] = 0.5 * (z0[i] + z1[i]);
                delta[i] = 0.5 * (z1[i] - z0[i]);
            }
            auto after = step(kind, hp, loss, nxt);
            Vec z2 = after.w;
            z2.insert(z2.end(), after.m->begin(), after.m->end());

            Vec phi_p = phase_displacement(kind, hp, loss, add(zbar, delta), {}, {});
            Vec phi_m = phase_displacement(kind, hp, loss, sub(zbar, delta), {}, {});
            for (std::size_t i = 0; i < 2 * d; ++i) {
                const double lhs = 0.5 * (z2[i] + z1[i]) - zbar[i];
                const double rhs = 0.5 * (phi_p[i] + phi_m[i]);
                const double cscale = 1.0 + std::abs(rhs) + std::abs(phi_p[i]) + std::abs(phi_m[i]);
                if (std::abs(lhs - rhs) > 1e-12 * cscale)
                    return fail(std::string(to_string(kind)) + " center recurrence at t=" +
                                std::to_string(t));
            }
            Vec dn(2 * d);
            for (std::size_t i = 0; i < 2 * d; ++i) dn[i] = 0.5 * (z2[i] - z1[i]);
            for (std::size_t i = 0; i < 2 * d; ++i)
                for (std::size_t j = 0; j < 2 * d; ++j) {
                    const double lhs = dn[i] * dn[j] - delta[i] * delta[j];
                    const double rhs = 0.25 * (phi_p[i] * phi_p[j] + phi_m[i] * phi_m[j]) -
                                       2.0 * delta[i] * delta[j];
                    const double escale =
                        1.0 + std::abs(dn[i] * dn[j]) + std::abs(delta[i] * delta[j]);
                    if (std::abs(lhs - rhs) > 1e-12 * escale)
                        return fail(std::string(to_string(kind)) + " extent recurrence at t=" +
                                    std::to_string(t));
                }
            st = std::move(nxt);
            nxt = std::move(after);
        }
    }
    return ok();
}

// ---------------------------------------------------------------- criterion 8
std::optional<std::string> lowrank_fidelity() {
    // rod-flow gd on a 5-d quartic with one EoS direction; the low-rank
    // extent shadows the dense one through identical endpoint displacements
    const std::size_t d = 5;
    Vec s{21.0, 8.0, 5.0, 3.0, 2.0}, q(d, 1.0);
    auto loss = LossFn::diag_quartic(s, q);
    HyperParams hp;
    hp.eta = 0.1;  // S* = 20, coordinate 0 at EoS
    FlowConfig cfg;

    ExperimentConfig ec;
    ec.loss.kind = LossKind::DiagQuartic;
    ec.loss.sharpness = s;
    ec.loss.quartic_q = q;
    ec.loss.dim = d;
    ec.kind = OptimizerKind::GD;
    ec.hp = hp;
    ec.warmup_iterations = 3000;
    ec.n_iterations = 3001;
    ec.w0 = Vec{0.3};
    auto [s0, s1] = warmup(ec, loss);
    auto [sf, rod] = init_flows(OptimizerKind::GD, s0, s1, ec.warmup_iterations);
    (void)sf;

    ExtentLowRank lr(d, 3);
    {
        Vec delta0(d);
        for (std::size_t i = 0; i < d; ++i) delta0[i] = 0.5 * (s1.w[i] - s0.w[i]);
        lr.seed_rank_one(delta0);
    }

    double max_frob = 0.0, max_orth = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        for (int sub = 0; sub < cfg.substeps; ++sub) {
            auto rhs = rod_rhs(OptimizerKind::GD, hp, loss, rod);
            axpy(cfg.dt, rhs.dwbar, rod.wbar);
            rod.extent.update(rhs.phi_plus, rhs.phi_minus, cfg.dt);
            lr.update(rhs.phi_plus, rhs.phi_minus, cfg.dt);
            max_frob = std::max(max_frob,
                                frobenius_dist(rod.extent.as_dense().sigma, lr.reconstruct()));
            max_orth = std::max(max_orth, lr.basis_orthonormality_error());
        }
        rod.synth_t += 1;
    }
    if (max_frob > 1e-8)
        return fail("frobenius discrepancy " + std::to_string(max_frob) + " > 1e-8");
    if (max_orth > 1e-10)
        return fail("orthonormality error " + std::to_string(max_orth) + " > 1e-10");
    return ok();
}

// ---------------------------------------------------------------- criterion 9
std::optional<std::string> dozat_nesterov() {
    HyperParams hp;
    hp.eta = 0.05;
    hp.beta1 = 0.5;
    auto quad = LossFn::quadratic(1.0, 1);
    const double dev_q = nadam_as_nesterov_check(hp, quad, Vec{1.0}, Vec{0.3}, 200);
    if (dev_q > 1e-8) return fail("quadratic deviation " + std::to_string(dev_q));

    HyperParams hpq;
    hpq.eta = 0.1;
    hpq.beta1 = 0.5;
    auto quartic = LossFn::quartic(3.0, 1.0, 1);
    const double dev_4 = nadam_as_nesterov_check(hpq, quartic, Vec{0.8}, Vec{-0.2}, 200);
    if (dev_4 > 1e-8) return fail("quartic deviation " + std::to_string(dev_4));
    return ok();
}

// --------------------------------------------------------------- criterion 10
std::optional<std::string> bea_order() {
    const double S = 1.0;
    std::vector<double> etas{1e-2, 5e-3, 2.5e-3}, err1, err2;
    for (double eta : etas) {
        bea::VecField D = [eta, S](std::span<const double> x) { return Vec{-eta * S * x[0]}; };
        auto mf1 = bea::modified_field_generic(D, nullptr, 1);
        auto mf2 = bea::modified_field_generic(D, nullptr, 2);
        auto flow = [](const bea::VecField& f, double x0) {
            double x = x0;
            const int n = 20000;
            const double h = 1.0 / n;
            for (int k = 0; k < n; ++k) {
                const double k1 = f(Vec{x})[0];
                const double k2 = f(Vec{x + 0.5 * h * k1})[0];
                const double k3 = f(Vec{x + 0.5 * h * k2})[0];
                const double k4 = f(Vec{x + h * k3})[0];
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            return x;
        };
        const double mapped = 1.0 - eta * S;
        err1.push_back(std::abs(flow(mf1.eval, 1.0) - mapped));
        err2.push_back(std::abs(flow(mf2.eval, 1.0) - mapped));
    }
    for (std::size_t k = 0; k + 1 < etas.size(); ++k) {
        const double r1 = std::log2(err1[k] / err1[k + 1]);
        const double r2 = std::log2(err2[k] / err2[k + 1]);
        if (r1 < 1.8 || r1 > 2.2) return fail("order-1 rate " + std::to_string(r1));
        if (r2 < 2.7 || r2 > 3.3) return fail("order-2 rate " + std::to_string(r2));
    }
    return ok();
}

// --------------------------------------------------------------- criterion 11
std::optional<std::string> mlp_tracking() {
    ExperimentConfig ec;
    ec.loss.kind = LossKind::Mlp;
    ec.loss.mlp.in = 16;
    ec.loss.mlp.hidden = 16;
    ec.loss.mlp.out = 1;
    ec.loss.mlp.n_samples = 256;
    ec.loss.mlp.seed = 1;
    ec.loss.mlp.target_scale = 0.01;
    ec.kind = OptimizerKind::Adam;
    ec.hp.eta = 1e-3;
    ec.hp.beta1 = 0.5;
    ec.hp.beta2 = 0.999;
    ec.hp.epsilon = 1e-8;
    ec.warmup_iterations = 2000;
    ec.n_iterations = 4000;
    ec.eigen_cadence = 200;
    ec.checkpoint_interval = 2000;
    ec.seed = 1;
    ec.out_dir = (std::filesystem::temp_directory_path() / "rodflow_acceptance_mlp").string();
    std::filesystem::remove_all(ec.out_dir);

    // Mature the starting point so that warm-up ends inside the steady EoS
    // regime: by then the residual learning drift has fallen below the Adam
    // oscillation amplitude, which is what the single-rod model assumes.
    {
        auto loss = build_loss(ec.loss);
        auto s = make_initial_state(ec.kind, mlp_init_params(ec.loss.mlp, ec.seed));
        for (int t = 0; t < 8000; ++t) s = step(ec.kind, ec.hp, loss, s);
        ec.w0 = s.w;
    }

    RunResult res = run_lockstep(ec);
    if (res.rod_diverged || res.disc_diverged) return fail("trajectory diverged");

    const double dist_rod = res.final_record.dist_wbar_disc_to_rod;
    const double dist_sf = res.final_record.dist_wbar_disc_to_sf;
    if (!(dist_rod <= 0.2 * dist_sf))
        return fail("tracking: dist_rod=" + std::to_string(dist_rod) +
                    " vs 0.2*dist_sf=" + std::to_string(0.2 * dist_sf));

    // rod preconditioned sharpness within +/-20% of the Adam threshold over
    // the final quarter of the run
    const double want = theory::threshold(OptimizerKind::Adam, ec.hp.eta, ec.hp.beta1);
    CsvTable t = read_csv(res.metrics_path);
    const auto sharp_col = t.column_index("rod_pre_sharpness");
    const auto t_col = t.column_index("t");
    const double t_start = ec.warmup_iterations +
                           0.75 * static_cast<double>(ec.n_iterations - ec.warmup_iterations);
    int samples = 0;
    for (const auto& row : t.rows) {
        if (row[t_col] < t_start || std::isnan(row[sharp_col])) continue;
        ++samples;
        if (std::abs(row[sharp_col] - want) > 0.2 * want)
            return fail("rod sharpness " + std::to_string(row[sharp_col]) + " at t=" +
                        std::to_string(row[t_col]) + " outside +/-20% of " +
                        std::to_string(want));
    }
    if (samples == 0) return fail("no cadence samples in the final quarter");
    std::filesystem::remove_all(ec.out_dir);
    return ok();
}

// --------------------------------------------------------------- criterion 12
std::optional<std::string> lanczos_checks() {
    Rng rng(4321);
    for (std::size_t d : {10u, 30u, 50u}) {
        SymMat A(d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) A(i, j) = A(j, i) = rng.uniform(-1.0, 1.0);
        auto dense = eigh(A);
        eigs::LanczosSolver solver;
        solver.budget = 80;
        auto res = solver.top_eigs([&](std::span<const double> v) { return A.apply(v); }, d);
        const double scale = std::max(1.0, std::abs(dense.values[0]));
        if (std::abs(res.values[0] - dense.values[0]) > 1e-8 * scale)
            return fail("lanczos mismatch at d=" + std::to_string(d) + ": " +
                        describe(res.values[0], dense.values[0]));
    }

    // warm-start iteration ratio on a drifting quartic hvp
    const std::size_t d = 30;
    Vec s(d), q(d, 1.0);
    for (auto& x : s) x = rng.uniform(1.0, 8.0);
    s[0] = 25.0;
    auto loss = LossFn::diag_quartic(s, q);
    eigs::LanczosSolver warm;
    long long warm_total = 0, cold_total = 0;
    Vec w(d, 0.1);
    for (int call = 0; call < 20; ++call) {
        for (auto& x : w) x += 0.003;
        auto op = [&](std::span<const double> v) { return loss.hvp(w, v); };
        warm_total += warm.top_eigs(op, d).iterations;
        eigs::LanczosSolver cold(7000 + call);
        cold_total += cold.top_eigs(op, d).iterations;
    }
    const double ratio = static_cast<double>(warm_total) / static_cast<double>(cold_total);
    if (ratio > 0.8) return fail("warm-start iteration ratio " + std::to_string(ratio));
    return ok();
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "threshold table and divergence cross-check", threshold_table, 10.0},
        {2, "heavy-ball/nesterov 2-cycle amplitudes at S*", two_cycle_amplitudes, 1.0},
        {3, "quartic rod-flow fixed points (gd/hb/nesterov)", quartic_fixed_points, 30.0},
        {4, "rmsprop quadratic fixed point and sharpness", rmsprop_quadratic},
        {5, "adam quadratic fixed point and amplitude ratio", adam_quadratic},
        {6, "adam/rmsprop linear loss acts as sign-gd", linear_sign_gd},
        {7, "exact difference equations over 1000 steps", exact_difference},
        {8, "low-rank extent fidelity (d=5, r=3)", lowrank_fidelity},
        {9, "dozat/nesterov trajectory equivalence", dozat_nesterov},
        {10, "bea modified-field order test", bea_order},
        {11, "mlp lockstep tracking at eos", mlp_tracking, 300.0},
        {12, "lanczos dense cross-check and warm start", lanczos_checks},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::optional<std::string> err;
        try {
            err = c.run();
        } catch (const std::exception& e) {
            err = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!err && c.time_limit_s > 0.0 && secs > c.time_limit_s)
            err = "runtime " + std::to_string(secs) + "s exceeds " +
                  std::to_string(c.time_limit_s) + "s";
        if (err) {
            ++failures;
            std::printf("FAIL criterion %2d (%s) [%.1fs]: %s\n", c.number, c.title.c_str(), secs,
                        err->c_str());
        } else {
            std::printf("PASS criterion %2d (%s) [%.1fs]\n", c.number, c.title.c_str(), secs);
        }
        std::fflush(stdout);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
