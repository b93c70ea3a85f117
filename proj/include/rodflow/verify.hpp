#pragma once

#include <functional>
#include <iostream>
#include <sstream>

#include "rodflow/bea.hpp"
#include "rodflow/eigs.hpp"
#include "rodflow/flows.hpp"
#include "rodflow/harness.hpp"
#include "rodflow/theory.hpp"

namespace rodflow::verify {

struct Check {
    std::string name;
    std::function<std::optional<std::string>()> run;  // error message on failure
};

namespace detail {

inline std::optional<std::string> fail(const std::string& msg) { return msg; }

inline std::optional<std::string> expect(bool ok, const std::string& msg) {
    if (ok) return std::nullopt;
    return msg;
}

inline std::optional<std::string> expect_close(double got, double want, double rel,
                                               const std::string& what) {
    const double err = std::abs(got - want);
    if (err <= rel * std::max(1.0, std::abs(want))) return std::nullopt;
    std::ostringstream ss;
    ss << what << ": got " << got << ", want " << want << " (err " << err << ")";
    return ss.str();
}

}  // namespace detail

inline std::vector<Check> all_checks() {
    using detail::expect;
    using detail::expect_close;
    std::vector<Check> checks;

    checks.push_back({"theory.threshold_table", [] {
        struct Row {
            OptimizerKind kind;
            double eta, beta, want;
        };
        const Row rows[] = {
            {OptimizerKind::GD, 0.01, 0.0, 200.0},
            {OptimizerKind::HeavyBall, 0.05, 0.4, 40.0 * 1.4 / 0.6},
            {OptimizerKind::Nesterov, 0.05, 0.4, 40.0 * 1.4 / (0.6 * 1.8)},
            {OptimizerKind::ScalarRMSProp, 1e-3, 0.0, 2000.0},
            {OptimizerKind::RMSProp, 1e-3, 0.0, 2000.0},
            {OptimizerKind::ScalarAdam, 1e-4, 0.8, 180000.0},
            {OptimizerKind::Adam, 1e-4, 0.8, 180000.0},
            {OptimizerKind::ScalarNAdam, 1e-4, 0.8, 2e4 * 1.8 / (0.2 * 2.6)},
            {OptimizerKind::NAdam, 1e-4, 0.8, 2e4 * 1.8 / (0.2 * 2.6)},
        };
        for (const auto& r : rows)
            if (auto err = expect_close(theory::threshold(r.kind, r.eta, r.beta), r.want, 1e-12,
                                        std::string("threshold ") + to_string(r.kind)))
                return err;
        return std::optional<std::string>{};
    }});

    checks.push_back({"theory.recurrence_eigs", [] {
        for (double beta : {0.2, 0.5, 0.8}) {
            const double eta = 0.05;
            auto hb = theory::hb_recurrence_eigs(
                eta, beta, theory::threshold(OptimizerKind::HeavyBall, eta, beta));
            if (auto err = expect_close(hb.lambda2.real(), -beta, 1e-10, "hb lambda2")) return err;
            auto nag = theory::nesterov_recurrence_eigs(
                eta, beta, theory::threshold(OptimizerKind::Nesterov, eta, beta));
            if (auto err = expect_close(nag.lambda2.real(), beta / (1.0 + 2.0 * beta), 1e-10,
                                        "nesterov lambda2"))
                return err;
        }
        return std::optional<std::string>{};
    }});

    checks.push_back({"theory.amplitudes", [] {
        if (auto err = expect_close(
                theory::asymptotic_amplitude(OptimizerKind::HeavyBall, 1.0, 0.0, 0.05, 0.5), 3.0,
                1e-12, "hb amplitude"))
            return err;
        return expect_close(
            theory::asymptotic_amplitude(OptimizerKind::Nesterov, 1.0, 0.0, 0.05, 0.5), 0.6, 1e-12,
            "nesterov amplitude");
    }});

    checks.push_back({"theory.rmsprop_jacobian", [] {
        auto v = theory::rmsprop_quadratic_jacobian(1e-3, 0.99, 10.0);
        if (auto err = expect_close(v.trace, -0.01, 1e-12, "trace")) return err;
        if (auto err = expect_close(v.det, 0.02, 1e-12, "det")) return err;
        return expect(v.stable, "rmsprop fixed point should be stable");
    }});

    checks.push_back({"theory.oncone_stability", [] {
        const double eta = 0.05, beta = 0.4;
        const double s = theory::threshold(OptimizerKind::HeavyBall, eta, beta);
        if (auto err = expect(theory::hb_quartic_oncone_stability(eta, beta, 1.1 * s),
                              "S = 1.1 S* should be stable"))
            return err;
        return expect(!theory::hb_quartic_oncone_stability(eta, beta, 0.9 * s),
                      "S = 0.9 S* should be unstable");
    }});

    checks.push_back({"flows.sign_symmetry", [] {
        Rng rng(91);
        auto loss = LossFn::diag_quartic(Vec{6.0, 2.0}, Vec{1.0, 1.0});
        HyperParams hp;
        hp.eta = 0.05;
        hp.beta1 = 0.5;
        hp.beta2 = 0.99;
        for (auto kind : {OptimizerKind::GD, OptimizerKind::HeavyBall, OptimizerKind::Adam}) {
            const std::size_t dz = has_momentum(kind) ? 4 : 2;
            Vec zbar = rng.uniform_vec(dz, -0.5, 0.5);
            Vec delta = rng.uniform_vec(dz, -0.2, 0.2);
            Vec nu = is_adaptive(kind) ? rng.uniform_vec(2, 0.1, 1.0) : Vec{};
            auto a = rod_rhs_at(kind, hp, loss, zbar, nu, delta, 50);
            auto b = rod_rhs_at(kind, hp, loss, zbar, nu, scaled(delta, -1.0), 50);
            if (a.dwbar != b.dwbar || a.phi_plus != b.phi_minus)
                return detail::fail(std::string("sign symmetry broken for ") + to_string(kind));
        }
        return std::optional<std::string>{};
    }});

    checks.push_back({"flows.exact_difference.gd", [] {
        Rng rng(92);
        auto loss = LossFn::diag_quartic(Vec{22.0, 6.0, 1.0}, Vec{1.0, 1.0, 1.0});
        HyperParams hp;
        hp.eta = 0.1;
        auto st = make_initial_state(OptimizerKind::GD, rng.uniform_vec(3, 0.05, 0.3));
        auto nxt = step(OptimizerKind::GD, hp, loss, st);
        for (int t = 0; t < 500; ++t) {
            Vec wbar(3), delta(3);
            for (int i = 0; i < 3; ++i) {
                wbar[i] = 0.5 * (st.w[i] + nxt.w[i]);
                delta[i] = 0.5 * (nxt.w[i] - st.w[i]);
            }
            auto after = step(OptimizerKind::GD, hp, loss, nxt);
            Vec gp = loss.grad(add(wbar, delta));
            Vec gm = loss.grad(sub(wbar, delta));
            for (int i = 0; i < 3; ++i) {
                const double lhs = 0.5 * (after.w[i] + nxt.w[i]) - wbar[i];
                const double rhs = -0.5 * hp.eta * (gp[i] + gm[i]);
                if (std::abs(lhs - rhs) > 1e-12 * (1.0 + std::abs(rhs)))
                    return detail::fail("gd center recurrence is not exact");
            }
            st = std::move(nxt);
            nxt = std::move(after);
        }
        return std::optional<std::string>{};
    }});

    checks.push_back({"flows.precond_step_equivalence", [] {
        Rng rng(93);
        auto loss = LossFn::diag_quartic(Vec{6.0, 2.0}, Vec{1.0, 1.0});
        HyperParams hp;
        hp.eta = 0.05;
        hp.beta2 = 0.99;
        hp.epsilon = 1e-8;
        for (int trial = 0; trial < 10; ++trial) {
            Vec wbar = rng.uniform_vec(2, -1.0, 1.0);
            Vec delta = rng.uniform_vec(2, -0.3, 0.3);
            Vec nu = rng.uniform_vec(1, 0.2, 2.0);
            auto rms = rod_rhs_at(OptimizerKind::ScalarRMSProp, hp, loss, wbar, nu, delta, 0);
            HyperParams ht = hp;
            ht.eta = hp.eta / (std::sqrt(nu[0]) + hp.epsilon);
            auto gd = rod_rhs_at(OptimizerKind::GD, ht, loss, wbar, {}, delta, 0);
            if (rms.dwbar != gd.dwbar || rms.phi_plus != gd.phi_plus)
                return detail::fail("preconditioned step-size equivalence failed");
        }
        return std::optional<std::string>{};
    }});

    checks.push_back({"flows.quartic_extent_fixed_point", [] {
        const double eta = 0.1, S = 30.0, Q = 1.0;
        auto loss = LossFn::quartic(S, Q, 1);
        HyperParams hp;
        hp.eta = eta;
        FlowConfig cfg;
        RodState rod{Vec{0.0}, std::nullopt, std::nullopt, Extent::dense(1), 0};
        rod.extent.seed_rank_one(Vec{0.05});
        for (int t = 0; t < 60; ++t) advance_unit_time(OptimizerKind::GD, hp, loss, rod, cfg);
        return expect_close(rod.extent.entry(0, 0),
                            (S - theory::threshold(OptimizerKind::GD, eta)) / Q, 0.02,
                            "rod gd quartic sigma");
    }});

    checks.push_back({"extent.lowrank_matches_dense", [] {
        Rng rng(94);
        const std::size_t d = 5;
        Vec u1 = rng.uniform_vec(d, -1.0, 1.0), u2 = rng.uniform_vec(d, -1.0, 1.0);
        ExtentDense dense(d);
        ExtentLowRank lr(d, 3);
        for (int t = 0; t < 500; ++t) {
            Vec phi_p(d), phi_m(d);
            const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
            const double c = rng.uniform(-1.0, 1.0), e = rng.uniform(-1.0, 1.0);
            for (std::size_t i = 0; i < d; ++i) {
                phi_p[i] = a * u1[i] + b * u2[i];
                phi_m[i] = c * u1[i] + e * u2[i];
            }
            dense.update(phi_p, phi_m, 0.1);
            lr.update(phi_p, phi_m, 0.1);
            if (frobenius_dist(dense.sigma, lr.reconstruct()) > 1e-8)
                return detail::fail("dense/low-rank divergence at step " + std::to_string(t));
            if (lr.basis_orthonormality_error() > 1e-10)
                return detail::fail("low-rank basis lost orthonormality");
        }
        return std::optional<std::string>{};
    }});

    checks.push_back({"extent.rank_one_at_eos", [] {
        // heavy-ball rod on the 1-d quartic: the 2x2 phase extent collapses
        // to its principal direction at the fixed point
        const double eta = 0.1, beta = 0.4;
        const double s_star = theory::threshold(OptimizerKind::HeavyBall, eta, beta);
        auto loss = LossFn::quartic(1.5 * s_star, 1.0, 1);
        HyperParams hp;
        hp.eta = eta;
        hp.beta1 = beta;
        FlowConfig cfg;
        RodState rod{Vec{0.0}, Vec{0.0}, std::nullopt, Extent::dense(2), 0};
        rod.extent.seed_rank_one(Vec{0.1, -0.5});
        for (int t = 0; t < 400; ++t)
            advance_unit_time(OptimizerKind::HeavyBall, hp, loss, rod, cfg);
        auto evs = rod.extent.as_dense().eigenvalues();
        return expect(evs[1] <= 1e-3 * evs[0], "lambda2/lambda1 should be <= 1e-3 at EoS");
    }});

    checks.push_back({"optim.dozat_nesterov", [] {
        HyperParams hp;
        hp.eta = 0.05;
        hp.beta1 = 0.5;
        auto quad = LossFn::quadratic(1.0, 1);
        const double dev = nadam_as_nesterov_check(hp, quad, Vec{1.0}, Vec{0.3}, 200);
        return expect(dev <= 1e-8, "dozat/nesterov deviation " + std::to_string(dev));
    }});

    checks.push_back({"eigs.lanczos_dense_crosscheck", [] {
        Rng rng(95);
        SymMat A(20);
        for (int i = 0; i < 20; ++i)
            for (int j = i; j < 20; ++j) A(i, j) = A(j, i) = rng.uniform(-1.0, 1.0);
        auto dense = eigh(A);
        eigs::LanczosSolver solver;
        auto res = solver.top_eigs([&](std::span<const double> v) { return A.apply(v); }, 20);
        return expect_close(res.values[0], dense.values[0], 1e-8, "lanczos top eigenvalue");
    }});

    checks.push_back({"bea.order_test", [] {
        const double S = 1.0;
        Vec errs1, errs2;
        for (double eta : {1e-2, 5e-3, 2.5e-3}) {
            bea::VecField D = [eta, S](std::span<const double> x) {
                return Vec{-eta * S * x[0]};
            };
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
            errs1.push_back(std::abs(flow(mf1.eval, 1.0) - mapped));
            errs2.push_back(std::abs(flow(mf2.eval, 1.0) - mapped));
        }
        for (std::size_t k = 0; k + 1 < errs1.size(); ++k) {
            const double r1 = std::log2(errs1[k] / errs1[k + 1]);
            const double r2 = std::log2(errs2[k] / errs2[k + 1]);
            if (r1 < 1.8 || r1 > 2.2)
                return detail::fail("order-1 rate " + std::to_string(r1) + " out of [1.8, 2.2]");
            if (r2 < 2.7 || r2 > 3.3)
                return detail::fail("order-2 rate " + std::to_string(r2) + " out of [2.7, 3.3]");
        }
        return std::optional<std::string>{};
    }});

    return checks;
}

// Runs all checks whose name contains `filter`; returns the failure count.
inline int run_checks(const std::string& filter, std::ostream& os) {
    int failures = 0, executed = 0;
    for (auto& check : all_checks()) {
        if (!filter.empty() && check.name.find(filter) == std::string::npos) continue;
        ++executed;
        std::optional<std::string> err;
        try {
            err = check.run();
        } catch (const std::exception& e) {
            err = std::string("exception: ") + e.what();
        }
        if (err) {
            ++failures;
            os << "FAIL " << check.name << ": " << *err << "\n";
        } else {
            os << "PASS " << check.name << "\n";
        }
    }
    if (executed == 0) os << "no checks match filter\n";
    os << executed - failures << "/" << executed << " checks passed\n";
    return failures;
}

}  // namespace rodflow::verify
