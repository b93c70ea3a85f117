#pragma once

#include <memory>
#include <string>

#include "rodflow/linalg.hpp"

namespace rodflow {

enum class LossKind { Linear, Quadratic, Quartic, DiagQuadratic, DiagQuartic, Mlp };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::Linear: return "linear";
        case LossKind::Quadratic: return "quadratic";
        case LossKind::Quartic: return "quartic";
        case LossKind::DiagQuadratic: return "diag_quadratic";
        case LossKind::DiagQuartic: return "diag_quartic";
        case LossKind::Mlp: return "mlp";
    }
    return "?";
}

// Two-layer tanh regression network: in -> hidden (tanh) -> out (linear),
// trained against a fixed synthetic dataset drawn from a random teacher
// of the same topology. Parameters flatten layer-major, weights before
// biases: [W1, b1, W2, b2] with W row-major (fan_out x fan_in).
struct MlpSpec {
    std::size_t in = 16;
    std::size_t hidden = 16;
    std::size_t out = 1;
    std::size_t n_samples = 256;
    std::uint64_t seed = 1;
    double target_scale = 1.0;

    std::size_t param_count() const { return hidden * in + hidden + out * hidden + out; }
};

struct MlpData {
    MlpSpec spec;
    std::vector<Vec> inputs;   // n_samples x in
    std::vector<Vec> targets;  // n_samples x out
};

inline std::shared_ptr<const MlpData> make_mlp_data(const MlpSpec& spec) {
    auto data = std::make_shared<MlpData>();
    data->spec = spec;
    Rng rng(spec.seed);

    // teacher weights
    std::vector<Vec> tw1(spec.hidden, Vec(spec.in));
    Vec tb1(spec.hidden);
    std::vector<Vec> tw2(spec.out, Vec(spec.hidden));
    Vec tb2(spec.out);
    for (auto& row : tw1)
        for (auto& v : row) v = rng.normal() / std::sqrt(static_cast<double>(spec.in));
    for (auto& v : tb1) v = 0.1 * rng.normal();
    for (auto& row : tw2)
        for (auto& v : row) v = rng.normal() / std::sqrt(static_cast<double>(spec.hidden));
    for (auto& v : tb2) v = 0.1 * rng.normal();

    data->inputs.reserve(spec.n_samples);
    data->targets.reserve(spec.n_samples);
    for (std::size_t n = 0; n < spec.n_samples; ++n) {
        Vec x = rng.uniform_vec(spec.in, -1.0, 1.0);
        Vec h(spec.hidden);
        for (std::size_t j = 0; j < spec.hidden; ++j)
            h[j] = std::tanh(dot(tw1[j], x) + tb1[j]);
        Vec y(spec.out);
        for (std::size_t k = 0; k < spec.out; ++k)
            y[k] = spec.target_scale * (dot(tw2[k], h) + tb2[k]);
        data->inputs.push_back(std::move(x));
        data->targets.push_back(std::move(y));
    }
    return data;
}

// Deterministic initial parameter vector for training the student network.
inline Vec mlp_init_params(const MlpSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    Vec w(spec.param_count());
    std::size_t p = 0;
    for (std::size_t j = 0; j < spec.hidden; ++j)
        for (std::size_t i = 0; i < spec.in; ++i)
            w[p++] = rng.normal() / std::sqrt(static_cast<double>(spec.in));
    for (std::size_t j = 0; j < spec.hidden; ++j) w[p++] = 0.0;
    for (std::size_t k = 0; k < spec.out; ++k)
        for (std::size_t j = 0; j < spec.hidden; ++j)
            w[p++] = rng.normal() / std::sqrt(static_cast<double>(spec.hidden));
    for (std::size_t k = 0; k < spec.out; ++k) w[p++] = 0.0;
    return w;
}

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Differentiable objective: value, gradient, Hessian-vector product.
// Immutable after construction; safe for concurrent read-only use.
class LossFn {
  public:
    static LossFn linear(Vec slope) {
        LossFn f;
        f.kind_ = LossKind::Linear;
        f.dim_ = slope.size();
        f.b_ = std::move(slope);
        return f;
    }
    static LossFn quadratic(double sharpness, std::size_t d = 1) {
        LossFn f;
        f.kind_ = LossKind::Quadratic;
        f.dim_ = d;
        f.s_.assign(d, sharpness);
        return f;
    }
    static LossFn diag_quadratic(Vec sharpness) {
        LossFn f;
        f.kind_ = LossKind::DiagQuadratic;
        f.dim_ = sharpness.size();
        f.s_ = std::move(sharpness);
        return f;
    }
    static LossFn quartic(double sharpness, double q, std::size_t d = 1) {
        LossFn f;
        f.kind_ = LossKind::Quartic;
        f.dim_ = d;
        f.s_.assign(d, sharpness);
        f.q_.assign(d, q);
        return f;
    }
    static LossFn diag_quartic(Vec sharpness, Vec q) {
        if (sharpness.size() != q.size()) throw DimensionError("diag_quartic: S/Q size mismatch");
        LossFn f;
        f.kind_ = LossKind::DiagQuartic;
        f.dim_ = sharpness.size();
        f.s_ = std::move(sharpness);
        f.q_ = std::move(q);
        return f;
    }
    static LossFn mlp(const MlpSpec& spec) {
        LossFn f;
        f.kind_ = LossKind::Mlp;
        f.mlp_ = make_mlp_data(spec);
        f.dim_ = spec.param_count();
        return f;
    }

    LossKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const MlpData* mlp_data() const { return mlp_.get(); }

    double value(std::span<const double> w) const {
        check_dim(w.size());
        switch (kind_) {
            case LossKind::Linear:
                return dot(b_, w);
            case LossKind::Quadratic:
            case LossKind::DiagQuadratic: {
                double s = 0.0;
                for (std::size_t i = 0; i < dim_; ++i) s += 0.5 * s_[i] * w[i] * w[i];
                return s;
            }
            case LossKind::Quartic:
            case LossKind::DiagQuartic: {
                double s = 0.0;
                for (std::size_t i = 0; i < dim_; ++i) {
                    const double w2 = w[i] * w[i];
                    s += 0.5 * s_[i] * w2 - 0.25 * q_[i] * w2 * w2;
                }
                return s;
            }
            case LossKind::Mlp:
                return mlp_value(w);
        }
        return 0.0;
    }

    Vec grad(std::span<const double> w) const {
        check_dim(w.size());
        Vec g(dim_);
        switch (kind_) {
            case LossKind::Linear:
                g = b_;
                break;
            case LossKind::Quadratic:
            case LossKind::DiagQuadratic:
                for (std::size_t i = 0; i < dim_; ++i) g[i] = s_[i] * w[i];
                break;
            case LossKind::Quartic:
            case LossKind::DiagQuartic:
                for (std::size_t i = 0; i < dim_; ++i)
                    g[i] = s_[i] * w[i] - q_[i] * (w[i] * w[i] * w[i]);
                break;
            case LossKind::Mlp:
                mlp_grad(w, g);
                break;
        }
        return g;
    }

    Vec hvp(std::span<const double> w, std::span<const double> v) const {
        check_dim(w.size());
        check_dim(v.size());
        Vec r(dim_, 0.0);
        switch (kind_) {
            case LossKind::Linear:
                break;  // zero Hessian
            case LossKind::Quadratic:
            case LossKind::DiagQuadratic:
                for (std::size_t i = 0; i < dim_; ++i) r[i] = s_[i] * v[i];
                break;
            case LossKind::Quartic:
            case LossKind::DiagQuartic:
                for (std::size_t i = 0; i < dim_; ++i)
                    r[i] = (s_[i] - 3.0 * q_[i] * w[i] * w[i]) * v[i];
                break;
            case LossKind::Mlp: {
                // central finite difference of the gradient
                const double vn = norm2(v);
                if (vn == 0.0) break;
                const double h = std::cbrt(2.220446049250313e-16) * (1.0 + norm2(w)) /
                                 std::max(vn, 1.0);
                Vec wp(w.begin(), w.end()), wm(w.begin(), w.end());
                axpy(h, v, wp);
                axpy(-h, v, wm);
                Vec gp(dim_), gm(dim_);
                mlp_grad(wp, gp);
                mlp_grad(wm, gm);
                for (std::size_t i = 0; i < dim_; ++i) r[i] = (gp[i] - gm[i]) / (2.0 * h);
                break;
            }
        }
        return r;
    }

  private:
    LossFn() = default;

    void check_dim(std::size_t n) const {
        if (n != dim_)
            throw DimensionError("loss: vector length " + std::to_string(n) +
                                 " does not match dimension " + std::to_string(dim_));
    }

    double mlp_value(std::span<const double> w) const {
        const auto& d = *mlp_;
        const auto& s = d.spec;
        const double* W1 = w.data();
        const double* b1 = W1 + s.hidden * s.in;
        const double* W2 = b1 + s.hidden;
        const double* b2 = W2 + s.out * s.hidden;
        double total = 0.0;
        Vec h(s.hidden);
        for (std::size_t n = 0; n < s.n_samples; ++n) {
            const Vec& x = d.inputs[n];
            for (std::size_t j = 0; j < s.hidden; ++j) {
                double a = b1[j];
                const double* row = W1 + j * s.in;
                for (std::size_t i = 0; i < s.in; ++i) a += row[i] * x[i];
                h[j] = std::tanh(a);
            }
            for (std::size_t k = 0; k < s.out; ++k) {
                double y = b2[k];
                const double* row = W2 + k * s.hidden;
                for (std::size_t j = 0; j < s.hidden; ++j) y += row[j] * h[j];
                const double e = y - d.targets[n][k];
                total += e * e;
            }
        }
        return total / (2.0 * static_cast<double>(s.n_samples));
    }

    void mlp_grad(std::span<const double> w, Vec& g) const {
        const auto& d = *mlp_;
        const auto& s = d.spec;
        const double* W1 = w.data();
        const double* b1 = W1 + s.hidden * s.in;
        const double* W2 = b1 + s.hidden;
        const double* b2 = W2 + s.out * s.hidden;
        std::fill(g.begin(), g.end(), 0.0);
        double* gW1 = g.data();
        double* gb1 = gW1 + s.hidden * s.in;
        double* gW2 = gb1 + s.hidden;
        double* gb2 = gW2 + s.out * s.hidden;
        const double inv_n = 1.0 / static_cast<double>(s.n_samples);
        Vec h(s.hidden), err(s.out), dh(s.hidden);
        for (std::size_t n = 0; n < s.n_samples; ++n) {
            const Vec& x = d.inputs[n];
            for (std::size_t j = 0; j < s.hidden; ++j) {
                double a = b1[j];
                const double* row = W1 + j * s.in;
                for (std::size_t i = 0; i < s.in; ++i) a += row[i] * x[i];
                h[j] = std::tanh(a);
            }
            for (std::size_t k = 0; k < s.out; ++k) {
                double y = b2[k];
                const double* row = W2 + k * s.hidden;
                for (std::size_t j = 0; j < s.hidden; ++j) y += row[j] * h[j];
                err[k] = (y - d.targets[n][k]) * inv_n;
            }
            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t k = 0; k < s.out; ++k) {
                const double e = err[k];
                double* grow = gW2 + k * s.hidden;
                const double* row = W2 + k * s.hidden;
                for (std::size_t j = 0; j < s.hidden; ++j) {
                    grow[j] += e * h[j];
                    dh[j] += e * row[j];
                }
                gb2[k] += e;
            }
            for (std::size_t j = 0; j < s.hidden; ++j) {
                const double da = dh[j] * (1.0 - h[j] * h[j]);  // tanh'
                double* grow = gW1 + j * s.in;
                for (std::size_t i = 0; i < s.in; ++i) grow[i] += da * x[i];
                gb1[j] += da;
            }
        }
    }

    LossKind kind_ = LossKind::Quadratic;
    std::size_t dim_ = 0;
    Vec b_;  // Linear slope
    Vec s_;  // per-coordinate sharpness
    Vec q_;  // per-coordinate quartic coefficient
    std::shared_ptr<const MlpData> mlp_;
};

}  // namespace rodflow
