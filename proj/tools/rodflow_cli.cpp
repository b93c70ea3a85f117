// Command-line front end: run lockstep experiments, print stability
// thresholds, run the verification suite, plot metrics, sweep grids.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rodflow/harness.hpp"
#include "rodflow/plot.hpp"
#include "rodflow/theory.hpp"
#include "rodflow/verify.hpp"

namespace {

using namespace rodflow;

struct CommonOverrides {
    std::string optimizer;
    double lr = 0.0;
    double beta1 = -1.0;
    double beta2 = -1.0;
};

void apply_overrides(ExperimentConfig& ec, const CommonOverrides& ov) {
    if (!ov.optimizer.empty()) {
        auto kind = optimizer_kind_from_string(ov.optimizer);
        if (!kind) throw ConfigError("--optimizer: unknown optimizer '" + ov.optimizer + "'");
        ec.kind = *kind;
    }
    if (ov.lr > 0.0) ec.hp.eta = ov.lr;
    if (ov.beta1 >= 0.0) ec.hp.beta1 = ov.beta1;
    if (ov.beta2 >= 0.0) ec.hp.beta2 = ov.beta2;
    ec.validate();
}

int report_run(const RunResult& res) {
    std::cout << "wrote " << res.rows << " rows to " << res.metrics_path << "\n";
    if (res.any_divergence()) {
        std::cout << "divergence:";
        if (res.disc_diverged) std::cout << " discrete";
        if (res.sf_diverged) std::cout << " stable-flow";
        if (res.rod_diverged) std::cout << " rod-flow";
        std::cout << " (first at t=" << res.first_divergence_t << ")\n";
        return 2;
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const CommonOverrides& ov) {
    auto ec = experiment_from_config(Config::parse_file(config_path));
    if (!out_dir.empty()) ec.out_dir = out_dir;
    apply_overrides(ec, ov);
    return report_run(run_lockstep(ec));
}

int cmd_thresholds(const std::string& kind_arg, double eta, double beta1) {
    std::vector<OptimizerKind> kinds;
    if (kind_arg.empty()) {
        kinds = {OptimizerKind::GD, OptimizerKind::HeavyBall, OptimizerKind::Nesterov,
                 OptimizerKind::ScalarRMSProp, OptimizerKind::RMSProp, OptimizerKind::ScalarAdam,
                 OptimizerKind::ScalarNAdam, OptimizerKind::Adam, OptimizerKind::NAdam};
    } else {
        auto k = optimizer_kind_from_string(kind_arg);
        if (!k) throw ConfigError("--optimizer: unknown optimizer '" + kind_arg + "'");
        kinds = {*k};
    }
    std::cout << "optimizer        threshold      note\n";
    for (auto k : kinds) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-16s %-14.6g %s", to_string(k),
                      theory::threshold(k, eta, beta1),
                      is_adaptive(k) ? "applies to the preconditioned sharpness" : "");
        std::cout << buf << "\n";
    }
    return 0;
}

int cmd_plot(const std::string& metrics_path, const std::string& columns,
             const std::string& out_path, bool log_y, const std::string& kind_arg, double lr,
             double beta1) {
    CsvTable table = read_csv(metrics_path);
    PlotSpec spec;
    spec.panels = parse_column_groups(columns);
    spec.log_y = log_y;
    if (!kind_arg.empty() && lr > 0.0) {
        auto k = optimizer_kind_from_string(kind_arg);
        if (!k) throw ConfigError("--optimizer: unknown optimizer '" + kind_arg + "'");
        spec.threshold = theory::threshold(*k, lr, beta1);
    }
    render_svg_file(table, spec, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

struct SweepParam {
    std::string section, key;
    Vec values;
};

SweepParam parse_sweep_param(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--param: expected section.key=v1,v2,... got '" + arg + "'");
    const std::string path = arg.substr(0, eq);
    const auto dot = path.find('.');
    if (dot == std::string::npos)
        throw ConfigError("--param: key must be section.key, got '" + path + "'");
    SweepParam p;
    p.section = path.substr(0, dot);
    p.key = path.substr(dot + 1);
    std::istringstream ss(arg.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        p.values.push_back(std::stod(item));
    }
    if (p.values.empty()) throw ConfigError("--param: no values in '" + arg + "'");
    return p;
}

std::string cell_name(const std::vector<SweepParam>& params, const std::vector<std::size_t>& idx) {
    std::string name;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) name += "_";
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s=%g", params[i].key.c_str(), params[i].values[idx[i]]);
        name += buf;
    }
    return name;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& param_args,
              const std::string& out_root) {
    const Config base = Config::parse_file(config_path);
    std::vector<SweepParam> params;
    for (const auto& arg : param_args) params.push_back(parse_sweep_param(arg));
    if (params.empty()) throw ConfigError("sweep requires at least one --param");

    // cartesian grid
    std::vector<std::vector<std::size_t>> cells;
    std::vector<std::size_t> idx(params.size(), 0);
    for (;;) {
        cells.push_back(idx);
        std::size_t k = 0;
        while (k < params.size()) {
            if (++idx[k] < params[k].values.size()) break;
            idx[k] = 0;
            ++k;
        }
        if (k == params.size()) break;
    }

    std::size_t max_threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RODFLOW_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) max_threads = static_cast<std::size_t>(v);
    }

    std::vector<int> rc(cells.size(), 0);
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&]() {
        for (;;) {
            std::size_t my;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= cells.size()) return;
                my = next++;
            }
            try {
                Config cfg = base;
                for (std::size_t i = 0; i < params.size(); ++i)
                    cfg.set(params[i].section, params[i].key, params[i].values[cells[my][i]]);
                ExperimentConfig ec = experiment_from_config(cfg);
                ec.out_dir = out_root + "/" + cell_name(params, cells[my]);
                RunResult res = run_lockstep(ec);
                std::lock_guard<std::mutex> lock(mu);
                std::cout << ec.out_dir << ": " << res.rows << " rows"
                          << (res.any_divergence() ? " (divergence)" : "") << "\n";
                rc[my] = res.any_divergence() ? 2 : 0;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                std::cerr << "cell " << my << " failed: " << e.what() << "\n";
                rc[my] = 1;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::min(max_threads, cells.size()); ++i)
        pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    int worst = 0;
    for (int c : rc) worst = std::max(worst, c);
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rod flow simulation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, optimizer_arg, columns, metrics_path, filter;
    std::vector<std::string> param_args;
    double lr = 0.0, beta1 = -1.0, beta2 = -1.0;
    bool log_y = false;

    auto* run = app.add_subcommand("run", "run a lockstep experiment from a config file");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_path, "output directory (overrides [run] out_dir)");
    run->add_option("--optimizer", optimizer_arg, "override optimizer kind");
    run->add_option("--lr", lr, "override step size");
    run->add_option("--beta1", beta1, "override beta1");
    run->add_option("--beta2", beta2, "override beta2");

    auto* thr = app.add_subcommand("thresholds", "print stability thresholds");
    thr->add_option("--optimizer", optimizer_arg, "optimizer kind (default: all nine)");
    thr->add_option("--lr", lr, "step size")->required();
    thr->add_option("--beta1", beta1, "momentum coefficient");

    auto* ver = app.add_subcommand("verify", "run the oracle verification suite");
    ver->add_option("--filter", filter, "only run checks whose name contains this substring");

    auto* plot = app.add_subcommand("plot", "render metrics columns to an svg");
    plot->add_option("--metrics", metrics_path, "metrics.csv path")->required();
    plot->add_option("--columns", columns, "comma-separated columns; ';' splits panels")
        ->required();
    plot->add_option("--out", out_path, "output svg path")->required();
    plot->add_flag("--log-y", log_y, "log-scale y axes");
    plot->add_option("--optimizer", optimizer_arg, "optimizer kind for a threshold rule");
    plot->add_option("--lr", lr, "step size for the threshold rule");
    plot->add_option("--beta1", beta1, "beta1 for the threshold rule");

    auto* sweep = app.add_subcommand("sweep", "run a cartesian grid of experiments");
    sweep->add_option("--config", config_path, "base config file")->required();
    sweep->add_option("--param", param_args, "grid values, e.g. optimizer.eta=1e-3,1e-4")
        ->required();
    sweep->add_option("--out", out_path, "output root directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        CommonOverrides ov{optimizer_arg, lr, beta1, beta2};
        if (run->parsed()) return cmd_run(config_path, out_path, ov);
        if (thr->parsed())
            return cmd_thresholds(optimizer_arg, lr, beta1 < 0.0 ? 0.0 : beta1);
        if (ver->parsed()) return rodflow::verify::run_checks(filter, std::cout) == 0 ? 0 : 1;
        if (plot->parsed())
            return cmd_plot(metrics_path, columns, out_path, log_y, optimizer_arg, lr,
                            beta1 < 0.0 ? 0.0 : beta1);
        if (sweep->parsed()) return cmd_sweep(config_path, param_args, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const PlotError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
