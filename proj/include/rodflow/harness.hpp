#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rodflow/config.hpp"
#include "rodflow/eigs.hpp"
#include "rodflow/flows.hpp"

namespace rodflow {

// One lockstep-iteration row. Sharpness columns are populated only at the
// eigen cadence and stay blank in the CSV otherwise.
struct MetricsRecord {
    long long t = 0;
    double disc_loss_w = 0, disc_loss_wbar = 0, sf_loss = 0, rod_loss_wbar = 0;
    double disc_delta_norm = 0, rod_delta_norm = 0, disc_mu_norm = 0, rod_mu_norm = 0;
    double dist_wbar_disc_to_sf = 0, dist_wbar_disc_to_rod = 0, cos_delta_alignment = 0;
    double nu_norm_disc = 0, nu_norm_sf = 0, nu_norm_rod = 0;
    std::optional<double> disc_pre_sharpness, sf_pre_sharpness, rod_pre_sharpness;

    static const char* csv_header() {
        return "t,disc_loss_w,disc_loss_wbar,sf_loss,rod_loss_wbar,disc_delta_norm,"
               "rod_delta_norm,disc_mu_norm,rod_mu_norm,dist_wbar_disc_to_sf,"
               "dist_wbar_disc_to_rod,cos_delta_alignment,nu_norm_disc,nu_norm_sf,"
               "nu_norm_rod,disc_pre_sharpness,sf_pre_sharpness,rod_pre_sharpness";
    }
};

namespace detail {

// shortest decimal representation that round-trips
inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline void append_csv_row(std::ostream& os, const MetricsRecord& r) {
    os << r.t;
    for (double v : {r.disc_loss_w, r.disc_loss_wbar, r.sf_loss, r.rod_loss_wbar,
                     r.disc_delta_norm, r.rod_delta_norm, r.disc_mu_norm, r.rod_mu_norm,
                     r.dist_wbar_disc_to_sf, r.dist_wbar_disc_to_rod, r.cos_delta_alignment,
                     r.nu_norm_disc, r.nu_norm_sf, r.nu_norm_rod})
        os << ',' << format_double(v);
    for (const auto& opt : {r.disc_pre_sharpness, r.sf_pre_sharpness, r.rod_pre_sharpness}) {
        os << ',';
        if (opt) os << format_double(*opt);
    }
    os << '\n';
}

inline double nu_norm(const std::optional<Vec>& nu) { return nu ? norm2(*nu) : 0.0; }

inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a), nb = norm2(b);
    if (na < 1e-300 || nb < 1e-300) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace detail

// Runs the discrete optimizer for warmup_iterations steps and returns that
// state together with its one-step successor (the pair that seeds the flows).
inline std::pair<OptimizerState, OptimizerState> warmup(const ExperimentConfig& ec,
                                                        const LossFn& loss) {
    OptimizerState s = make_initial_state(ec.kind, initial_point(ec, loss));
    for (long long i = 0; i < ec.warmup_iterations; ++i) s = step(ec.kind, ec.hp, loss, s);
    OptimizerState s1 = step(ec.kind, ec.hp, loss, s);
    return {std::move(s), std::move(s1)};
}

// Flow centers are the midpoints of the two seeding iterates; the rod extent
// is the exact outer product of the phase-space half-difference, so the
// t = warmup rod endpoints coincide with the true iterates.
inline std::pair<StableState, RodState> init_flows(OptimizerKind kind, const OptimizerState& s0,
                                                   const OptimizerState& s1,
                                                   long long warmup_iterations,
                                                   std::size_t lowrank_r = 3) {
    const std::size_t d = s0.w.size();
    auto midpoint = [](const Vec& a, const Vec& b) {
        Vec m(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
        return m;
    };

    StableState sf;
    sf.w = midpoint(s0.w, s1.w);
    if (s0.m) sf.m = midpoint(*s0.m, *s1.m);
    if (s0.nu) sf.nu = midpoint(*s0.nu, *s1.nu);
    sf.synth_t = warmup_iterations;

    const std::size_t phase_dim = has_momentum(kind) ? 2 * d : d;
    RodState rod{sf.w,
                 sf.m,
                 sf.nu,
                 Extent::auto_select(phase_dim, lowrank_r),
                 warmup_iterations};
    Vec delta0(phase_dim);
    for (std::size_t i = 0; i < d; ++i) delta0[i] = 0.5 * (s1.w[i] - s0.w[i]);
    if (s0.m)
        for (std::size_t i = 0; i < d; ++i) delta0[d + i] = 0.5 * ((*s1.m)[i] - (*s0.m)[i]);
    rod.extent.seed_rank_one(delta0);
    return {std::move(sf), std::move(rod)};
}

struct RunResult {
    long long rows = 0;
    bool disc_diverged = false, sf_diverged = false, rod_diverged = false;
    long long first_divergence_t = -1;
    MetricsRecord final_record;
    std::string metrics_path, checkpoint_path;

    bool any_divergence() const { return disc_diverged || sf_diverged || rod_diverged; }
};

namespace detail {

inline nlohmann::json state_json(const OptimizerState& s) {
    nlohmann::json j;
    j["t"] = s.t;
    j["w"] = s.w;
    if (s.m) j["m"] = *s.m;
    if (s.nu) j["nu"] = *s.nu;
    return j;
}

inline nlohmann::json stable_json(const StableState& s) {
    nlohmann::json j;
    j["synth_t"] = s.synth_t;
    j["w"] = s.w;
    if (s.m) j["m"] = *s.m;
    if (s.nu) j["nu"] = *s.nu;
    return j;
}

inline nlohmann::json extent_json(const Extent& e) {
    nlohmann::json j;
    j["dim"] = e.dim();
    if (e.is_dense()) {
        j["type"] = "dense";
        j["sigma"] = e.as_dense().sigma.a;
    } else {
        const auto& lr = e.as_lowrank();
        j["type"] = "lowrank";
        j["rank"] = lr.rank();
        j["lambda"] = lr.lambda;
        Vec flat;
        flat.reserve(lr.rank() * lr.dim());
        for (const auto& col : lr.basis) flat.insert(flat.end(), col.begin(), col.end());
        j["V"] = flat;  // column-major
    }
    return j;
}

inline nlohmann::json rod_json(const RodState& r) {
    nlohmann::json j;
    j["synth_t"] = r.synth_t;
    j["wbar"] = r.wbar;
    if (r.mbar) j["mbar"] = *r.mbar;
    if (r.nubar) j["nubar"] = *r.nubar;
    j["extent"] = extent_json(r.extent);
    return j;
}

}  // namespace detail

// The lockstep experiment: after warm-up, each outer iteration advances the
// discrete optimizer by one step and both flows by one unit of simulated
// time, then records a metrics row. A diverging trajectory is frozen and the
// others continue.
inline RunResult run_lockstep(const ExperimentConfig& ec) {
    ec.validate();
    const LossFn loss = build_loss(ec.loss);
    const std::size_t d = loss.dim();

    std::filesystem::create_directories(ec.out_dir);
    RunResult result;
    result.metrics_path = ec.out_dir + "/metrics.csv";
    result.checkpoint_path = ec.out_dir + "/checkpoint.jsonl";
    std::ofstream csv(result.metrics_path);
    if (!csv) throw ConfigError("cannot write to " + result.metrics_path);
    std::ofstream ckpt(result.checkpoint_path);
    csv << MetricsRecord::csv_header() << '\n';

    auto [prev, cur] = warmup(ec, loss);
    auto [sf, rod] = init_flows(ec.kind, prev, cur, ec.warmup_iterations);

    eigs::LanczosSolver disc_solver, sf_solver, rod_solver;

    auto sharpness_of = [&](std::span<const double> w, const std::optional<Vec>& nu,
                            long long t_for_bc, eigs::LanczosSolver& solver) {
        std::span<const double> nu_span =
            nu ? std::span<const double>(*nu) : std::span<const double>{};
        double bc2 = 1.0;
        if (nu && uses_bias_correction(ec.kind))
            bc2 = 1.0 - std::pow(ec.hp.beta2, static_cast<double>(std::max<long long>(t_for_bc, 1)));
        return eigs::preconditioned_sharpness(loss, w, nu_span, ec.hp, solver, bc2);
    };

    const long long total = ec.n_iterations - ec.warmup_iterations;
    Vec disc_wbar = sf.w;        // (w_t + w_{t+1})/2 of the discrete pair
    Vec disc_delta(d, 0.0), disc_gamma;
    for (std::size_t i = 0; i < d; ++i) disc_delta[i] = 0.5 * (cur.w[i] - prev.w[i]);
    if (cur.m) {
        disc_gamma.assign(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) disc_gamma[i] = 0.5 * ((*cur.m)[i] - (*prev.m)[i]);
    }

    for (long long k = 1; k <= total; ++k) {
        const long long t_abs = ec.warmup_iterations + k;

        if (!result.disc_diverged) {
            try {
                OptimizerState next = step(ec.kind, ec.hp, loss, cur);
                for (std::size_t i = 0; i < d; ++i) {
                    disc_wbar[i] = 0.5 * (cur.w[i] + next.w[i]);
                    disc_delta[i] = 0.5 * (next.w[i] - cur.w[i]);
                }
                if (next.m)
                    for (std::size_t i = 0; i < d; ++i)
                        disc_gamma[i] = 0.5 * ((*next.m)[i] - (*cur.m)[i]);
                prev = std::move(cur);
                cur = std::move(next);
            } catch (const DivergenceError& e) {
                result.disc_diverged = true;
                if (result.first_divergence_t < 0) result.first_divergence_t = e.t;
            }
        }
        if (!result.sf_diverged) {
            try {
                advance_unit_time(ec.kind, ec.hp, loss, sf, ec.flow);
            } catch (const DivergenceError& e) {
                result.sf_diverged = true;
                if (result.first_divergence_t < 0) result.first_divergence_t = e.t;
            }
        }
        if (!result.rod_diverged) {
            try {
                advance_unit_time(ec.kind, ec.hp, loss, rod, ec.flow);
            } catch (const DivergenceError& e) {
                result.rod_diverged = true;
                if (result.first_divergence_t < 0) result.first_divergence_t = e.t;
            }
        }

        MetricsRecord rec;
        rec.t = t_abs;
        rec.disc_loss_w = loss.value(cur.w);
        rec.disc_loss_wbar = loss.value(disc_wbar);
        rec.sf_loss = loss.value(sf.w);
        rec.rod_loss_wbar = loss.value(rod.wbar);

        const Vec rod_delta_full = rod.extent.principal_delta();
        auto rod_delta_w = std::span<const double>(rod_delta_full).subspan(0, d);
        rec.disc_delta_norm = norm2(disc_delta);
        rec.rod_delta_norm = norm2(rod_delta_w);
        rec.disc_mu_norm = disc_gamma.empty() ? 0.0 : norm2(disc_gamma);
        rec.rod_mu_norm =
            rod_delta_full.size() > d
                ? norm2(std::span<const double>(rod_delta_full).subspan(d, d))
                : 0.0;

        rec.dist_wbar_disc_to_sf = dist(disc_wbar, sf.w);
        rec.dist_wbar_disc_to_rod = dist(disc_wbar, rod.wbar);
        Vec dd = disc_delta;
        canonicalize_sign(dd);
        rec.cos_delta_alignment = detail::cosine(dd, rod_delta_w);

        rec.nu_norm_disc = detail::nu_norm(cur.nu);
        rec.nu_norm_sf = detail::nu_norm(sf.nu);
        rec.nu_norm_rod = detail::nu_norm(rod.nubar);

        if (k % ec.eigen_cadence == 0 || k == total) {
            rec.disc_pre_sharpness = sharpness_of(disc_wbar, cur.nu, cur.t, disc_solver);
            rec.sf_pre_sharpness = sharpness_of(sf.w, sf.nu, sf.synth_t, sf_solver);
            rec.rod_pre_sharpness = sharpness_of(rod.wbar, rod.nubar, rod.synth_t, rod_solver);
        }

        detail::append_csv_row(csv, rec);
        csv.flush();
        ++result.rows;
        result.final_record = rec;

        if (k % ec.checkpoint_interval == 0 || k == total) {
            nlohmann::json j;
            j["t"] = t_abs;
            j["disc"] = detail::state_json(cur);
            j["disc_frozen"] = result.disc_diverged;
            j["sf"] = detail::stable_json(sf);
            j["sf_frozen"] = result.sf_diverged;
            j["rod"] = detail::rod_json(rod);
            j["rod_frozen"] = result.rod_diverged;
            ckpt << j.dump() << '\n';
            ckpt.flush();
        }
    }
    return result;
}

}  // namespace rodflow
