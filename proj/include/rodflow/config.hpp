#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include "rodflow/flows.hpp"
#include "rodflow/losses.hpp"
#include "rodflow/optim.hpp"

namespace rodflow {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// TOML-style key/value file with [loss], [optimizer], [flow], [run] sections.
// Values: numbers, booleans, quoted or bare strings, arrays of numbers.
class Config {
  public:
    using Value = std::variant<bool, double, std::string, Vec>;

    static Config parse_text(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip_comment(line);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": malformed section header");
                section = trim(s.substr(1, s.size() - 2));
                cfg.sections_[section];
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(s.substr(0, eq));
            const std::string val = trim(s.substr(eq + 1));
            if (key.empty() || val.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
            cfg.sections_[section][key] = parse_value(val, section, key);
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse_text(ss.str());
    }

    bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
    bool has(const std::string& sec, const std::string& key) const {
        auto it = sections_.find(sec);
        return it != sections_.end() && it->second.count(key) > 0;
    }

    double get_double(const std::string& sec, const std::string& key) const {
        const Value& v = require(sec, key);
        if (auto* d = std::get_if<double>(&v)) return *d;
        throw ConfigError("[" + sec + "] " + key + ": expected a number");
    }
    double get_double(const std::string& sec, const std::string& key, double dflt) const {
        return has(sec, key) ? get_double(sec, key) : dflt;
    }
    long long get_int(const std::string& sec, const std::string& key) const {
        const double d = get_double(sec, key);
        const long long i = static_cast<long long>(d);
        if (static_cast<double>(i) != d)
            throw ConfigError("[" + sec + "] " + key + ": expected an integer");
        return i;
    }
    long long get_int(const std::string& sec, const std::string& key, long long dflt) const {
        return has(sec, key) ? get_int(sec, key) : dflt;
    }
    bool get_bool(const std::string& sec, const std::string& key, bool dflt) const {
        if (!has(sec, key)) return dflt;
        const Value& v = require(sec, key);
        if (auto* b = std::get_if<bool>(&v)) return *b;
        throw ConfigError("[" + sec + "] " + key + ": expected true or false");
    }
    std::string get_string(const std::string& sec, const std::string& key) const {
        const Value& v = require(sec, key);
        if (auto* s = std::get_if<std::string>(&v)) return *s;
        throw ConfigError("[" + sec + "] " + key + ": expected a string");
    }
    std::string get_string(const std::string& sec, const std::string& key,
                           const std::string& dflt) const {
        return has(sec, key) ? get_string(sec, key) : dflt;
    }
    // scalar keys broadcast to length-1 arrays
    Vec get_array(const std::string& sec, const std::string& key) const {
        const Value& v = require(sec, key);
        if (auto* a = std::get_if<Vec>(&v)) return *a;
        if (auto* d = std::get_if<double>(&v)) return Vec{*d};
        throw ConfigError("[" + sec + "] " + key + ": expected a number or array");
    }

    void set(const std::string& sec, const std::string& key, Value v) {
        sections_[sec][key] = std::move(v);
    }

  private:
    const Value& require(const std::string& sec, const std::string& key) const {
        auto it = sections_.find(sec);
        if (it == sections_.end()) throw ConfigError("missing [" + sec + "] section");
        auto jt = it->second.find(key);
        if (jt == it->second.end())
            throw ConfigError("missing key '" + key + "' in [" + sec + "]");
        return jt->second;
    }

    static std::string strip_comment(const std::string& s) {
        bool in_str = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_str = !in_str;
            if (s[i] == '#' && !in_str) return s.substr(0, i);
        }
        return s;
    }
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static Value parse_value(const std::string& val, const std::string& sec,
                             const std::string& key) {
        if (val == "true") return true;
        if (val == "false") return false;
        if (val.front() == '"') {
            if (val.size() < 2 || val.back() != '"')
                throw ConfigError("[" + sec + "] " + key + ": unterminated string");
            return val.substr(1, val.size() - 2);
        }
        if (val.front() == '[') {
            if (val.back() != ']')
                throw ConfigError("[" + sec + "] " + key + ": unterminated array");
            Vec arr;
            std::string inner = val.substr(1, val.size() - 2);
            std::istringstream ss(inner);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                arr.push_back(parse_number(item, sec, key));
            }
            return arr;
        }
        if ((val.front() >= '0' && val.front() <= '9') || val.front() == '-' ||
            val.front() == '+' || val.front() == '.')
            return parse_number(val, sec, key);
        return val;  // bare string
    }
    static double parse_number(const std::string& s, const std::string& sec,
                               const std::string& key) {
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || end != s.c_str() + s.size())
            throw ConfigError("[" + sec + "] " + key + ": cannot parse number '" + s + "'");
        return d;
    }

    std::map<std::string, std::map<std::string, Value>> sections_;
};

struct LossSpec {
    LossKind kind = LossKind::Quadratic;
    Vec sharpness{1.0};  // per-coordinate S (or broadcast)
    Vec quartic_q{1.0};
    Vec slope{1.0};
    std::size_t dim = 1;
    MlpSpec mlp;
};

inline LossFn build_loss(const LossSpec& spec) {
    switch (spec.kind) {
        case LossKind::Linear: {
            Vec b = spec.slope;
            if (b.size() == 1 && spec.dim > 1) b.assign(spec.dim, spec.slope[0]);
            return LossFn::linear(std::move(b));
        }
        case LossKind::Quadratic:
            return LossFn::quadratic(spec.sharpness[0], spec.dim);
        case LossKind::DiagQuadratic:
            return LossFn::diag_quadratic(spec.sharpness);
        case LossKind::Quartic:
            return LossFn::quartic(spec.sharpness[0], spec.quartic_q[0], spec.dim);
        case LossKind::DiagQuartic: {
            Vec q = spec.quartic_q;
            if (q.size() == 1 && spec.sharpness.size() > 1)
                q.assign(spec.sharpness.size(), spec.quartic_q[0]);
            return LossFn::diag_quartic(spec.sharpness, std::move(q));
        }
        case LossKind::Mlp:
            return LossFn::mlp(spec.mlp);
    }
    throw ConfigError("unknown loss kind");
}

struct ExperimentConfig {
    LossSpec loss;
    OptimizerKind kind = OptimizerKind::GD;
    HyperParams hp;
    FlowConfig flow;
    long long warmup_iterations = 0;
    long long n_iterations = 1;
    long long eigen_cadence = 200;
    long long checkpoint_interval = 1000;
    std::uint64_t seed = 1;
    std::optional<Vec> w0;
    std::string out_dir = "out";

    void validate() const {
        try {
            hp.validate();
            flow.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (warmup_iterations < 0 || n_iterations <= 0 || warmup_iterations >= n_iterations)
            throw ConfigError("[run] requires 0 <= warmup_iterations < n_iterations");
        if (eigen_cadence <= 0) throw ConfigError("[run] eigen_cadence must be positive");
        if (checkpoint_interval <= 0) throw ConfigError("[run] checkpoint_interval must be positive");
    }
};

inline ExperimentConfig experiment_from_config(const Config& cfg) {
    ExperimentConfig ec;
    if (!cfg.has_section("loss")) throw ConfigError("missing [loss] section");
    if (!cfg.has_section("optimizer")) throw ConfigError("missing [optimizer] section");

    const std::string lk = cfg.get_string("loss", "kind");
    if (lk == "linear") {
        ec.loss.kind = LossKind::Linear;
        ec.loss.slope = cfg.get_array("loss", "b");
    } else if (lk == "quadratic") {
        ec.loss.kind = LossKind::Quadratic;
        ec.loss.sharpness = cfg.get_array("loss", "S");
    } else if (lk == "diag_quadratic") {
        ec.loss.kind = LossKind::DiagQuadratic;
        ec.loss.sharpness = cfg.get_array("loss", "S");
    } else if (lk == "quartic") {
        ec.loss.kind = LossKind::Quartic;
        ec.loss.sharpness = cfg.get_array("loss", "S");
        ec.loss.quartic_q = cfg.get_array("loss", "Q");
    } else if (lk == "diag_quartic") {
        ec.loss.kind = LossKind::DiagQuartic;
        ec.loss.sharpness = cfg.get_array("loss", "S");
        ec.loss.quartic_q = cfg.get_array("loss", "Q");
    } else if (lk == "mlp") {
        ec.loss.kind = LossKind::Mlp;
        ec.loss.mlp.in = static_cast<std::size_t>(cfg.get_int("loss", "in", 16));
        ec.loss.mlp.hidden = static_cast<std::size_t>(cfg.get_int("loss", "hidden", 16));
        ec.loss.mlp.out = static_cast<std::size_t>(cfg.get_int("loss", "out", 1));
        ec.loss.mlp.n_samples = static_cast<std::size_t>(cfg.get_int("loss", "samples", 256));
        ec.loss.mlp.seed = static_cast<std::uint64_t>(cfg.get_int("loss", "seed", 1));
        ec.loss.mlp.target_scale = cfg.get_double("loss", "target_scale", 1.0);
    } else {
        throw ConfigError("[loss] kind: unknown loss kind '" + lk + "'");
    }
    ec.loss.dim = static_cast<std::size_t>(
        cfg.get_int("loss", "dim", static_cast<long long>(std::max<std::size_t>(
                                       1, std::max(ec.loss.sharpness.size(), ec.loss.slope.size())))));
    if (ec.loss.kind == LossKind::DiagQuadratic || ec.loss.kind == LossKind::DiagQuartic)
        ec.loss.dim = ec.loss.sharpness.size();

    const std::string ok = cfg.get_string("optimizer", "kind");
    auto kind = optimizer_kind_from_string(ok);
    if (!kind) throw ConfigError("[optimizer] kind: unknown optimizer '" + ok + "'");
    ec.kind = *kind;
    ec.hp.eta = cfg.get_double("optimizer", "eta");
    ec.hp.beta1 = cfg.get_double("optimizer", "beta1", 0.0);
    ec.hp.beta2 = cfg.get_double("optimizer", "beta2", 0.999);
    ec.hp.epsilon = cfg.get_double("optimizer", "epsilon", 0.0);

    ec.flow.substeps = static_cast<int>(cfg.get_int("flow", "substeps", 10));
    ec.flow.dt = cfg.get_double("flow", "dt", 0.1);
    ec.flow.bea_correction = cfg.get_bool("flow", "bea_correction", false);

    ec.warmup_iterations = cfg.get_int("run", "warmup_iterations", 0);
    ec.n_iterations = cfg.get_int("run", "n_iterations");
    ec.eigen_cadence = cfg.get_int("run", "eigen_cadence", 200);
    ec.checkpoint_interval = cfg.get_int("run", "checkpoint_interval", 1000);
    ec.seed = static_cast<std::uint64_t>(cfg.get_int("run", "seed", 1));
    if (cfg.has("run", "w0")) ec.w0 = cfg.get_array("run", "w0");
    ec.out_dir = cfg.get_string("run", "out_dir", "out");

    ec.validate();
    return ec;
}

// Initial parameter vector: explicit [run] w0 when given (scalars broadcast),
// otherwise a seeded default per loss kind.
inline Vec initial_point(const ExperimentConfig& ec, const LossFn& loss) {
    const std::size_t d = loss.dim();
    if (ec.w0) {
        Vec w = *ec.w0;
        if (w.size() == 1 && d > 1) w.assign(d, (*ec.w0)[0]);
        if (w.size() != d) throw ConfigError("[run] w0: length does not match loss dimension");
        return w;
    }
    if (loss.kind() == LossKind::Mlp) return mlp_init_params(loss.mlp_data()->spec, ec.seed);
    Rng rng(ec.seed);
    Vec w(d);
    for (auto& x : w) x = rng.uniform(0.5, 1.0);
    return w;
}

}  // namespace rodflow
