// attrlab: command-line front end for attractor experiments.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "attrlab/experiment.hpp"

namespace {

using attrlab::cli::ExperimentConfig;
using nlohmann::json;

struct Flags {
    std::optional<std::string> family, out, from, config;
    std::optional<double> lambda, dt, t_step, tol_cells, escape_margin, delta, t_unit, T;
    std::optional<long long> max_iter, consecutive, samples, window, horizon, max_steps, dini_n, threads;
    std::vector<double> grid, domain, seed_box, times;
    std::vector<long long> cells;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON configuration file; flags override its values");
    sub->add_option("--family", f.family, "system family: pitchfork, semistable, lorenz");
    sub->add_option("--lambda", f.lambda, "parameter value");
    sub->add_option("--grid", f.grid, "parameter grid: lambda_min lambda_max m")->expected(3);
    sub->add_option("--domain", f.domain, "state domain: lower upper per axis")->expected(1, 32);
    sub->add_option("--cells", f.cells, "cells per axis (one value or one per axis)")->expected(1, 16);
    sub->add_option("--seed-box", f.seed_box, "seed box: lower upper per axis")->expected(1, 32);
    sub->add_option("--dt", f.dt, "RK4 step");
    sub->add_option("--tstep", f.t_step, "flow time per image step");
    sub->add_option("--tol-cells", f.tol_cells, "convergence tolerance in cell widths");
    sub->add_option("--max-iter", f.max_iter, "iteration cap");
    sub->add_option("--consec", f.consecutive, "consecutive small steps required");
    sub->add_option("--samples", f.samples, "sample points per axis and cell (0 = default)");
    sub->add_option("--escape-margin", f.escape_margin, "escape box margin as a fraction of the domain width");
    sub->add_option("--delta", f.delta, "discontinuity threshold");
    sub->add_option("--window", f.window, "neighbour window in grid steps");
    sub->add_option("--times", f.times, "evaluation times for the equi-attraction curve")->expected(1, 1 << 16);
    sub->add_option("--horizon", f.horizon, "number of t_step multiples when --times is absent");
    sub->add_option("--t-unit", f.t_unit, "time unit for absorbing-time search");
    sub->add_option("--max-steps", f.max_steps, "absorbing-time search cap, in t_unit");
    sub->add_option("--dini-n", f.dini_n, "iterations of the monotonicity check");
    sub->add_option("--T", f.T, "absorbing time; selected automatically when absent");
    sub->add_option("--threads", f.threads, "worker threads");
    sub->add_option("--from", f.from, "scan: directory written by an earlier sweep");
    sub->add_option("--out", f.out, "output directory");
}

template <class T>
void take(const json& j, const char* key, T& dst, std::vector<std::string>& problems) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception&) {
        problems.push_back(std::string(key) + ": wrong type in config file");
    }
}

template <class T>
void take(const json& j, const char* key, std::optional<T>& dst, std::vector<std::string>& problems) {
    if (!j.contains(key)) return;
    T v{};
    take(j, key, v, problems);
    dst = v;
}

void apply_config_file(const std::string& path, ExperimentConfig& c) {
    std::ifstream is(path);
    if (!is) throw attrlab::ValidationError({"config: cannot open " + path});
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw attrlab::ValidationError({std::string("config: ") + e.what()});
    }
    if (!j.is_object()) throw attrlab::ValidationError({"config: top level must be an object"});
    static const std::vector<std::string> known = {
        "family", "lambda", "grid", "domain", "cells_per_axis", "seed_box", "dt", "t_step", "tol_cells",
        "max_iter", "consecutive", "samples_per_axis", "escape_margin", "delta", "window", "times", "horizon",
        "t_unit", "max_steps", "dini_n", "T", "from", "out", "threads"};
    std::vector<std::string> problems;
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) problems.push_back(k + ": unknown config key");
    take(j, "family", c.family, problems);
    take(j, "lambda", c.lambda, problems);
    if (j.contains("grid")) {
        std::vector<double> g;
        take(j, "grid", g, problems);
        if (g.size() == 3) {
            c.lambda_min = g[0];
            c.lambda_max = g[1];
            c.lambda_count = static_cast<long long>(g[2]);
        } else {
            problems.push_back("grid: expected [lambda_min, lambda_max, m]");
        }
    }
    take(j, "domain", c.domain, problems);
    if (j.contains("cells_per_axis")) {
        if (j["cells_per_axis"].is_array())
            take(j, "cells_per_axis", c.cells, problems);
        else {
            long long n = 0;
            take(j, "cells_per_axis", n, problems);
            c.cells = {n};
        }
    }
    take(j, "seed_box", c.seed_box, problems);
    take(j, "dt", c.dt, problems);
    take(j, "t_step", c.t_step, problems);
    take(j, "tol_cells", c.tol_cells, problems);
    take(j, "max_iter", c.max_iter, problems);
    take(j, "consecutive", c.consecutive, problems);
    take(j, "samples_per_axis", c.samples, problems);
    take(j, "escape_margin", c.escape_margin, problems);
    take(j, "delta", c.delta, problems);
    take(j, "window", c.window, problems);
    take(j, "times", c.times, problems);
    take(j, "horizon", c.horizon, problems);
    take(j, "t_unit", c.t_unit, problems);
    take(j, "max_steps", c.max_steps, problems);
    take(j, "dini_n", c.dini_n, problems);
    take(j, "T", c.T, problems);
    take(j, "from", c.from, problems);
    take(j, "out", c.out, problems);
    take(j, "threads", c.threads, problems);
    if (!problems.empty()) throw attrlab::ValidationError(std::move(problems));
}

ExperimentConfig build_config(const std::string& command, const Flags& f) {
    ExperimentConfig c;
    c.command = command;
    if (f.config) apply_config_file(*f.config, c);
    if (f.family) c.family = *f.family;
    if (f.lambda) c.lambda = f.lambda;
    if (!f.grid.empty()) {
        c.lambda_min = f.grid[0];
        c.lambda_max = f.grid[1];
        c.lambda_count = static_cast<long long>(f.grid[2]);
    }
    if (!f.domain.empty()) c.domain = f.domain;
    if (!f.cells.empty()) c.cells = f.cells;
    if (!f.seed_box.empty()) c.seed_box = f.seed_box;
    if (f.dt) c.dt = *f.dt;
    if (f.t_step) c.t_step = *f.t_step;
    if (f.tol_cells) c.tol_cells = *f.tol_cells;
    if (f.max_iter) c.max_iter = *f.max_iter;
    if (f.consecutive) c.consecutive = *f.consecutive;
    if (f.samples) c.samples = *f.samples;
    if (f.escape_margin) c.escape_margin = *f.escape_margin;
    if (f.delta) c.delta = f.delta;
    if (f.window) c.window = *f.window;
    if (!f.times.empty()) c.times = f.times;
    if (f.horizon) c.horizon = *f.horizon;
    if (f.t_unit) c.t_unit = *f.t_unit;
    if (f.max_steps) c.max_steps = *f.max_steps;
    if (f.dini_n) c.dini_n = *f.dini_n;
    if (f.T) c.T = f.T;
    if (f.from) c.from = *f.from;
    if (f.out) c.out = *f.out;
    if (f.threads) c.threads = *f.threads;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = attrlab::cli;
    CLI::App app{"Box-cover approximation of attractors and their dependence on parameters"};
    app.set_version_flag("--version", std::string(ATTRLAB_VERSION));
    app.require_subcommand(1);

    Flags flags;
    std::string report_dir;
    const std::vector<std::pair<const char*, const char*>> commands = {
        {"attractor", "approximate the attractor at one parameter"},
        {"sweep", "approximate attractors over a parameter grid"},
        {"equi", "estimate the equi-attraction curve over a parameter grid"},
        {"dini", "check monotone convergence of iterates of an absorbing set"},
        {"scan", "flag parameters where the attractor jumps"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), flags);
    auto* report = app.add_subcommand("report", "summarize an output directory");
    report->add_option("dir", report_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitValidation;
    }

    if (report->parsed()) return cli::cmd_report(report_dir);

    const std::string command = app.get_subcommands().front()->get_name();
    ExperimentConfig cfg;
    try {
        cfg = build_config(command, flags);
    } catch (const attrlab::ValidationError& e) {
        std::cerr << e.what() << '\n';
        return cli::kExitValidation;
    }
    if (command == "attractor") return cli::cmd_attractor(cfg);
    if (command == "sweep") return cli::cmd_sweep(cfg);
    if (command == "equi") return cli::cmd_equi(cfg);
    if (command == "dini") return cli::cmd_dini(cfg);
    return cli::cmd_scan(cfg);
}
