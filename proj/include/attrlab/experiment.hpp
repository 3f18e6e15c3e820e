#pragma once

// Batch experiments: resolved configuration, validation, and the commands
// behind the command-line tool. Every command writes its CSV / cover-dump
// outputs plus a `manifest` (key=value) into the output directory.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "attrlab/attractor.hpp"
#include "attrlab/boxset.hpp"
#include "attrlab/continuity.hpp"
#include "attrlab/errors.hpp"
#include "attrlab/flow.hpp"

#ifndef ATTRLAB_VERSION
#define ATTRLAB_VERSION "0.1.0"
#endif

namespace attrlab::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitComputation = 3;

struct ExperimentConfig {
    std::string command;
    std::string family = "pitchfork";
    std::optional<double> lambda;
    std::optional<double> lambda_min;
    std::optional<double> lambda_max;
    std::optional<long long> lambda_count;
    std::vector<double> domain;     ///< l1 u1 l2 u2 ...; empty = family default
    std::vector<long long> cells;   ///< one value for every axis, or one per axis
    std::vector<double> seed_box;   ///< same layout as domain; empty = whole grid
    double dt = 0.01;
    double t_step = 1.0;
    double tol_cells = 2.0;
    long long max_iter = 500;
    long long consecutive = 3;
    long long samples = 0;          ///< 0 = dimension default
    double escape_margin = 0.5;
    std::optional<double> delta;
    long long window = 1;
    std::vector<double> times;
    long long horizon = 50;         ///< times = t_step * (1..horizon) when no list is given
    double t_unit = 1.0;
    long long max_steps = 100;
    long long dini_n = 10;
    std::optional<double> T;
    std::string from;
    std::string out = "out";
    long long threads = 1;
};

// ---------------------------------------------------------------------------
// Validation and resolution

inline bool needs_single_lambda(const std::string& cmd) { return cmd == "attractor"; }
inline bool needs_grid(const std::string& cmd) {
    return cmd == "sweep" || cmd == "equi" || cmd == "dini" || cmd == "scan";
}

/// Collects every violation instead of stopping at the first.
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
    std::vector<std::string> p;
    std::optional<SystemFamily> fam;
    try {
        fam = family_by_name(c.family);
    } catch (const UsageError& e) {
        p.push_back(std::string("family: ") + e.what());
    }
    const std::size_t d = fam ? fam->state_dim : 0;

    if (needs_single_lambda(c.command) && !c.lambda) p.push_back("lambda: required for '" + c.command + "'");
    if (c.lambda && !std::isfinite(*c.lambda)) p.push_back("lambda: must be finite");
    if (fam && c.lambda && (*c.lambda < fam->param_min || *c.lambda > fam->param_max))
        p.push_back("lambda: outside the documented range [" + format_double(fam->param_min) + ", " +
                    format_double(fam->param_max) + "] of " + fam->name);
    const bool want_grid = needs_grid(c.command) && !(c.command == "scan" && !c.from.empty());
    if (want_grid) {
        if (!c.lambda_min || !c.lambda_max || !c.lambda_count) {
            p.push_back("grid: lambda_min lambda_max m required for '" + c.command + "'");
        } else {
            if (!(*c.lambda_min < *c.lambda_max)) p.push_back("grid: lambda_min must be below lambda_max");
            if (*c.lambda_count < 2) p.push_back("grid: m must be at least 2");
            if (fam && (*c.lambda_min < fam->param_min || *c.lambda_max > fam->param_max))
                p.push_back("grid: outside the documented range of " + fam->name);
        }
    }

    if (!c.domain.empty()) {
        if (fam && c.domain.size() != 2 * d)
            p.push_back("domain: expected " + std::to_string(2 * d) + " numbers (lower upper per axis)");
        for (std::size_t i = 0; i + 1 < c.domain.size(); i += 2)
            if (!(c.domain[i] < c.domain[i + 1])) p.push_back("domain: lower must be below upper on every axis");
    }
    if (!c.cells.empty()) {
        if (fam && c.cells.size() != 1 && c.cells.size() != d)
            p.push_back("cells_per_axis: give one value or one per axis");
        for (auto n : c.cells)
            if (n <= 0) {
                p.push_back("cells_per_axis: must be positive (got " + std::to_string(n) + ")");
                break;
            }
    }
    if (!c.seed_box.empty() && fam && c.seed_box.size() != 2 * d)
        p.push_back("seed_box: expected " + std::to_string(2 * d) + " numbers");

    if (!(c.dt > 0.0) || c.dt > 0.1) p.push_back("dt: must lie in (0, 0.1]");
    if (!(c.t_step > 0.0)) p.push_back("t_step: must be positive");
    if (!(c.tol_cells >= 1.0)) p.push_back("tol_cells: must be at least 1 cell width");
    if (c.max_iter <= 0) p.push_back("max_iter: must be positive");
    if (c.consecutive <= 0) p.push_back("consecutive: must be positive");
    if (c.samples != 0 && c.samples < 2) p.push_back("samples_per_axis: must be at least 2");
    if (!(c.escape_margin >= 0.0)) p.push_back("escape_margin: must be non-negative");
    if (c.window < 0) p.push_back("window: must be non-negative");
    if (c.threads <= 0 || c.threads > 1024) p.push_back("threads: must lie in [1, 1024]");
    if (c.command == "scan") {
        if (!c.delta) p.push_back("delta: required for 'scan'");
        else if (!(*c.delta > 0.0)) p.push_back("delta: must be positive");
        if (c.window < 1) p.push_back("window: scan needs window >= 1");
    }
    if (c.command == "equi") {
        double prev = 0.0;
        for (double t : c.times) {
            if (!(t > prev)) {
                p.push_back("times: must be positive and strictly increasing");
                break;
            }
            prev = t;
        }
        if (c.times.empty() && c.horizon <= 0) p.push_back("horizon: must be positive");
    }
    if (c.command == "dini") {
        if (!(c.t_unit > 0.0)) p.push_back("t_unit: must be positive");
        if (c.max_steps <= 0) p.push_back("max_steps: must be positive");
        if (c.dini_n <= 0) p.push_back("dini_n: must be positive");
        if (c.T && !(*c.T > 0.0)) p.push_back("T: must be positive");
    }
    if (c.out.empty()) p.push_back("out: output directory required");

    // Checks that need the resolved grid.
    if (p.empty() && fam) {
        try {
            std::vector<std::size_t> n(d);
            for (std::size_t i = 0; i < d; ++i)
                n[i] = static_cast<std::size_t>(c.cells.empty() ? (d == 1 ? 1024 : 64)
                                                                : c.cells[c.cells.size() == 1 ? 0 : i]);
            Box dom = fam->default_domain;
            if (!c.domain.empty())
                for (std::size_t i = 0; i < d; ++i) {
                    dom.lower[i] = c.domain[2 * i];
                    dom.upper[i] = c.domain[2 * i + 1];
                }
            GridSpec g(dom, n);
            if (c.delta && c.command == "scan" && c.from.empty() && *c.delta < 2.0 * g.cell_width())
                p.push_back("delta: must be at least two cell widths (" + format_double(2.0 * g.cell_width()) + ")");
        } catch (const UsageError& e) {
            p.push_back(std::string("cells_per_axis/domain: ") + e.what());
        }
    }
    return p;
}

struct Resolved {
    SystemFamily family;
    GridSpec grid;
    BoxCover seed;
    AttractorSettings settings;
    std::optional<ParamGrid> params;
};

inline Resolved resolve(const ExperimentConfig& c) {
    if (auto problems = validate_config(c); !problems.empty()) throw ValidationError(std::move(problems));
    Resolved r{family_by_name(c.family), {}, {}, {}, std::nullopt};
    const std::size_t d = r.family.state_dim;
    Box dom = r.family.default_domain;
    if (!c.domain.empty())
        for (std::size_t i = 0; i < d; ++i) {
            dom.lower[i] = c.domain[2 * i];
            dom.upper[i] = c.domain[2 * i + 1];
        }
    std::vector<std::size_t> n(d);
    for (std::size_t i = 0; i < d; ++i)
        n[i] = static_cast<std::size_t>(c.cells.empty() ? (d == 1 ? 1024 : 64) : c.cells[c.cells.size() == 1 ? 0 : i]);
    r.grid = GridSpec(dom, n);
    if (c.seed_box.empty()) {
        r.seed = BoxCover::full(r.grid);
    } else {
        Box sb{std::vector<double>(d), std::vector<double>(d)};
        for (std::size_t i = 0; i < d; ++i) {
            sb.lower[i] = c.seed_box[2 * i];
            sb.upper[i] = c.seed_box[2 * i + 1];
        }
        r.seed = BoxCover::covering(r.grid, sb);
        if (r.seed.is_empty()) throw ValidationError({"seed_box: does not meet the grid domain"});
    }
    r.settings.t_step = c.t_step;
    r.settings.tol = c.tol_cells * r.grid.cell_width();
    r.settings.max_iter = static_cast<std::size_t>(c.max_iter);
    r.settings.consecutive = static_cast<std::size_t>(c.consecutive);
    r.settings.image.samples_per_axis = static_cast<std::size_t>(c.samples);
    r.settings.image.integrator.dt = c.dt;
    r.settings.image.integrator.escape_box = dom.widened(c.escape_margin);
    r.settings.image.threads = static_cast<unsigned>(c.threads);
    if (c.lambda_min && c.lambda_max && c.lambda_count)
        r.params = ParamGrid::uniform(*c.lambda_min, *c.lambda_max, static_cast<std::size_t>(*c.lambda_count));
    return r;
}

// ---------------------------------------------------------------------------
// Output helpers

/// Short form for console messages; files always use format_double.
inline std::string show(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

template <class T>
std::string join_values(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        if constexpr (std::is_floating_point_v<T>)
            s += format_double(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

inline void write_manifest(const fs::path& dir, const ExperimentConfig& c, const Resolved* r,
                           const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    auto os = open_out(dir / "manifest");
    auto opt = [](const auto& o) { return o ? format_double(static_cast<double>(*o)) : std::string(); };
    os << "version=" << ATTRLAB_VERSION << '\n';
    os << "command=" << c.command << '\n';
    os << "family=" << c.family << '\n';
    os << "lambda=" << opt(c.lambda) << '\n';
    os << "lambda_min=" << opt(c.lambda_min) << '\n';
    os << "lambda_max=" << opt(c.lambda_max) << '\n';
    os << "lambda_count=" << (c.lambda_count ? std::to_string(*c.lambda_count) : "") << '\n';
    if (r) {
        os << "domain_lower=" << join_values(r->grid.lower()) << '\n';
        os << "domain_upper=" << join_values(r->grid.upper()) << '\n';
        os << "cells_per_axis=" << join_values(r->grid.cells_per_axis()) << '\n';
        os << "cell_width=" << format_double(r->grid.cell_width()) << '\n';
        os << "tol=" << format_double(r->settings.tol) << '\n';
        os << "samples_per_axis=" << r->settings.image.samples_for(r->grid.dim()) << '\n';
        os << "escape_lower=" << join_values(r->settings.image.integrator.escape_box->lower) << '\n';
        os << "escape_upper=" << join_values(r->settings.image.integrator.escape_box->upper) << '\n';
    }
    os << "seed_box=" << join_values(c.seed_box) << '\n';
    os << "dt=" << format_double(c.dt) << '\n';
    os << "t_step=" << format_double(c.t_step) << '\n';
    os << "tol_cells=" << format_double(c.tol_cells) << '\n';
    os << "max_iter=" << c.max_iter << '\n';
    os << "consecutive=" << c.consecutive << '\n';
    os << "escape_margin=" << format_double(c.escape_margin) << '\n';
    os << "delta=" << opt(c.delta) << '\n';
    os << "window=" << c.window << '\n';
    os << "times=" << join_values(c.times) << '\n';
    os << "horizon=" << c.horizon << '\n';
    os << "t_unit=" << format_double(c.t_unit) << '\n';
    os << "max_steps=" << c.max_steps << '\n';
    os << "dini_n=" << c.dini_n << '\n';
    os << "T=" << opt(c.T) << '\n';
    os << "from=" << c.from << '\n';
    os << "threads=" << c.threads << '\n';
    for (const auto& [k, v] : extra) os << k << '=' << v << '\n';
}

inline std::map<std::string, std::string> read_manifest(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw UsageError("cannot read " + file.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

struct ErrorRow {
    std::string lambda;
    std::string kind;
    std::string message;
};

inline void write_errors(const fs::path& dir, const std::vector<ErrorRow>& rows) {
    auto os = open_out(dir / "errors.csv");
    os << "lambda,kind,message\n";
    for (const auto& r : rows) os << r.lambda << ',' << r.kind << ',' << csv_quote(r.message) << '\n';
}

inline ErrorRow error_row(const std::string& lambda, const std::exception& e) {
    return {lambda, detail::failure_kind(e), e.what()};
}

inline void write_trace(const fs::path& file, const ConvergenceTrace& trace) {
    auto os = open_out(file);
    os << "n,t,step_dist,cells\n";
    for (const auto& e : trace)
        os << e.n << ',' << format_double(e.t) << ',' << format_double(e.step_dist) << ',' << e.cells << '\n';
}

inline void write_cover_file(const fs::path& file, const BoxCover& c) {
    auto os = open_out(file);
    write_cover(os, c);
}

inline std::string cover_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cover_%04zu.txt", i);
    return buf;
}

inline void write_sweep(const fs::path& dir, const SweepResult& sr) {
    {
        auto os = open_out(dir / "sweep.csv");
        os << "lambda,cells,t_total,converged\n";
        for (std::size_t i = 0; i < sr.grid.size(); ++i) {
            const auto& a = sr.approxs[i];
            os << format_double(sr.grid[i]) << ',' << (a ? a->cover.count() : 0) << ','
               << format_double(a ? a->t_total : 0.0) << ',' << (a ? 1 : 0) << '\n';
        }
    }
    {
        auto os = open_out(dir / "dist.csv");
        os << "i,j,dH,rho_ij,rho_ji\n";
        for (const auto& [key, e] : sr.dist)
            os << e.i << ',' << e.j << ',' << format_double(e.dH) << ',' << format_double(e.rho_ij) << ','
               << format_double(e.rho_ji) << '\n';
    }
    fs::create_directories(dir / "covers");
    for (std::size_t i = 0; i < sr.grid.size(); ++i)
        if (sr.approxs[i]) write_cover_file(dir / "covers" / cover_name(i), sr.approxs[i]->cover);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw UsageError("bad number '" + s + "'");
    return v;
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw UsageError("cannot read " + file.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line))
        if (!line.empty()) rows.push_back(split_csv_line(line));
    return rows;
}

}  // namespace detail

/// Rebuilds a sweep from a directory written by `sweep`: lambdas from
/// sweep.csv, covers from covers/, distances verbatim from dist.csv.
inline SweepResult read_sweep(const fs::path& dir) {
    SweepResult sr;
    std::vector<double> lambdas;
    std::vector<bool> ok;
    for (const auto& row : detail::read_csv(dir / "sweep.csv")) {
        if (row.size() != 4) throw UsageError("sweep.csv: malformed row");
        lambdas.push_back(detail::parse_double(row[0]));
        ok.push_back(row[3] == "1");
    }
    sr.grid = ParamGrid::from_points(lambdas);
    sr.approxs.resize(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!ok[i]) continue;
        std::ifstream is(dir / "covers" / cover_name(i));
        if (!is) throw UsageError("missing cover for sweep point " + std::to_string(i));
        AttractorApprox a;
        a.lambda = lambdas[i];
        a.cover = read_cover(is);
        sr.approxs[i] = std::move(a);
    }
    sr.window = 0;
    for (const auto& row : detail::read_csv(dir / "dist.csv")) {
        if (row.size() != 5) throw UsageError("dist.csv: malformed row");
        DistEntry e;
        e.i = static_cast<std::size_t>(std::stoull(row[0]));
        e.j = static_cast<std::size_t>(std::stoull(row[1]));
        e.dH = detail::parse_double(row[2]);
        e.rho_ij = detail::parse_double(row[3]);
        e.rho_ji = detail::parse_double(row[4]);
        sr.window = std::max(sr.window, e.j - e.i);
        sr.dist[{e.i, e.j}] = e;
    }
    const auto manifest = dir / "manifest";
    if (fs::exists(manifest)) {
        const auto kv = read_manifest(manifest);
        if (auto it = kv.find("window"); it != kv.end() && !it->second.empty())
            sr.window = std::max<std::size_t>(sr.window, std::stoull(it->second));
    }
    return sr;
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code.

struct CommandContext {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

template <class Body>
int run_guarded(const ExperimentConfig& c, CommandContext ctx, Body&& body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        ctx.err << e.what() << '\n';
        return kExitValidation;
    } catch (const UsageError& e) {
        ctx.err << "usage error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const Error& e) {
        fs::create_directories(c.out);
        const std::string lam = c.lambda ? format_double(*c.lambda) : std::string();
        write_errors(c.out, {error_row(lam, e)});
        ctx.err << "computation failed: " << e.what() << '\n';
        return kExitComputation;
    }
}

inline int cmd_attractor(const ExperimentConfig& c, CommandContext ctx = {}) {
    return run_guarded(c, ctx, [&] {
        const Resolved r = resolve(c);
        const fs::path dir = c.out;
        fs::create_directories(dir);
        write_manifest(dir, c, &r);
        try {
            const AttractorApprox a = approximate_attractor(r.family, *c.lambda, r.seed, r.settings);
            write_cover_file(dir / "cover.txt", a.cover);
            write_trace(dir / "trace.csv", a.trace);
            write_manifest(dir, c, &r,
                           {{"t_total", format_double(a.t_total)},
                            {"invariance_defect", format_double(a.invariance_defect)},
                            {"discarded_samples", std::to_string(a.discarded_samples)}});
            if (a.discarded_samples > 0)
                ctx.err << "warning: " << a.discarded_samples << " samples left the grid and were discarded\n";
            ctx.out << "attractor: " << a.cover.count() << " cells after " << a.trace.size()
                    << " iterations, invariance defect " << show(a.invariance_defect / r.grid.cell_width())
                    << " cells\n";
            return kExitOk;
        } catch (const NonConvergence& e) {
            write_trace(dir / "trace.csv", e.trace);
            throw;
        }
    });
}

inline std::vector<ErrorRow> failure_rows(const std::vector<SweepFailure>& fails) {
    std::vector<ErrorRow> rows;
    for (const auto& f : fails) rows.push_back({format_double(f.lambda), f.kind, f.message});
    return rows;
}

inline int cmd_sweep(const ExperimentConfig& c, CommandContext ctx = {}) {
    return run_guarded(c, ctx, [&] {
        const Resolved r = resolve(c);
        fs::create_directories(c.out);
        write_manifest(c.out, c, &r);
        const SweepResult sr = sweep(r.family, *r.params, r.seed, r.settings, static_cast<std::size_t>(c.window),
                                     static_cast<unsigned>(c.threads));
        write_sweep(c.out, sr);
        if (!sr.failures.empty()) write_errors(c.out, failure_rows(sr.failures));
        ctx.out << "sweep: " << sr.grid.size() - sr.failures.size() << " of " << sr.grid.size()
                << " parameters converged\n";
        return kExitOk;
    });
}

inline std::vector<double> resolve_times(const ExperimentConfig& c) {
    if (!c.times.empty()) return c.times;
    std::vector<double> t;
    for (long long n = 1; n <= c.horizon; ++n) t.push_back(c.t_step * static_cast<double>(n));
    return t;
}

inline int cmd_equi(const ExperimentConfig& c, CommandContext ctx = {}) {
    return run_guarded(c, ctx, [&] {
        const Resolved r = resolve(c);
        fs::create_directories(c.out);
        write_manifest(c.out, c, &r);
        const unsigned threads = static_cast<unsigned>(c.threads);
        const SweepResult sr = sweep(r.family, *r.params, r.seed, r.settings, 0, threads);
        const auto times = resolve_times(c);
        const EquiAttractionCurve curve = equi_attraction_curve(r.family, sr, r.seed, times, r.settings.image, threads);
        {
            auto os = open_out(fs::path(c.out) / "equi.csv");
            os << "t,e,argmax_lambda\n";
            for (std::size_t n = 0; n < times.size(); ++n)
                os << format_double(times[n]) << ',' << format_double(curve.values[n]) << ','
                   << format_double(sr.grid[curve.argmax[n]]) << '\n';
        }
        {
            auto os = open_out(fs::path(c.out) / "equi_lambda.csv");
            os << "lambda,t,rho\n";
            for (std::size_t i = 0; i < sr.grid.size(); ++i)
                for (std::size_t n = 0; n < curve.per_lambda[i].size(); ++n)
                    os << format_double(sr.grid[i]) << ',' << format_double(times[n]) << ','
                       << format_double(curve.per_lambda[i][n]) << '\n';
        }
        if (!curve.failures.empty()) write_errors(c.out, failure_rows(curve.failures));
        write_manifest(c.out, c, &r, {{"coverage", curve.coverage_note}});
        ctx.out << "equi: e(t_last) = " << show(curve.values.back()) << " over " << curve.coverage_note << '\n';
        return kExitOk;
    });
}

inline int cmd_dini(const ExperimentConfig& c, CommandContext ctx = {}) {
    return run_guarded(c, ctx, [&] {
        const Resolved r = resolve(c);
        fs::create_directories(c.out);
        write_manifest(c.out, c, &r);
        const unsigned threads = static_cast<unsigned>(c.threads);
        std::vector<std::pair<std::string, std::string>> extra;
        double T = 0.0;
        if (c.T) {
            T = *c.T;
            extra.emplace_back("T_source", "given");
        } else {
            const SelectTResult sel = select_T(r.family, *r.params, r.seed, c.t_unit,
                                               static_cast<std::size_t>(c.max_steps), r.settings.image, threads);
            T = sel.T;
            extra.emplace_back("T_source", sel.note);
            extra.emplace_back("absorbing_steps", join_values(sel.steps));
        }
        extra.emplace_back("T_used", format_double(T));
        const DiniReport rep =
            dini_check(r.family, *r.params, r.seed, T, static_cast<std::size_t>(c.dini_n), r.settings, threads);
        {
            auto os = open_out(fs::path(c.out) / "dini.csv");
            os << "lambda,n,dH_to_final,subset_ok\n";
            for (const auto& dl : rep.per_lambda)
                for (const auto& row : dl.rows)
                    os << format_double(dl.lambda) << ',' << row.n << ',' << format_double(row.dH_to_final) << ','
                       << (row.subset_ok ? 1 : 0) << '\n';
        }
        extra.emplace_back("max_violation", format_double(rep.max_violation));
        extra.emplace_back("all_nested", rep.all_nested ? "1" : "0");
        write_manifest(c.out, c, &r, extra);
        if (rep.status == DiniReport::Status::unabsorbed) {
            write_errors(c.out, {{format_double(*rep.unabsorbed_lambda), "Unabsorbed",
                                  "image(D1, T) is not contained in D1 at T=" + format_double(T)}});
            ctx.err << "dini: unabsorbed at lambda=" << show(*rep.unabsorbed_lambda) << '\n';
            return kExitComputation;
        }
        if (rep.status == DiniReport::Status::failed) {
            std::vector<ErrorRow> rows;
            for (const auto& dl : rep.per_lambda)
                if (dl.failure) rows.push_back({format_double(dl.lambda), dl.failure->kind, dl.failure->message});
            write_errors(c.out, rows);
            ctx.err << "dini: computation failed at " << rows.size() << " parameter(s)\n";
            return kExitComputation;
        }
        ctx.out << "dini: T=" << show(T) << ", nested=" << (rep.all_nested ? "yes" : "no")
                << ", max violation " << show(rep.max_violation / r.grid.cell_width()) << " cells\n";
        return kExitOk;
    });
}

inline void write_scan(const fs::path& dir, const ContinuityReport& rep) {
    auto os = open_out(dir / "scan.csv");
    os << "lambda,osc,flagged\n";
    for (const auto& p : rep.points)
        os << format_double(p.lambda) << ',' << (p.osc ? format_double(*p.osc) : std::string("nan")) << ','
           << (p.flagged ? 1 : 0) << '\n';
}

inline int cmd_scan(const ExperimentConfig& c, CommandContext ctx = {}) {
    return run_guarded(c, ctx, [&] {
        if (auto problems = validate_config(c); !problems.empty()) throw ValidationError(std::move(problems));
        fs::create_directories(c.out);
        SweepResult sr;
        if (!c.from.empty()) {
            sr = read_sweep(c.from);
            write_manifest(c.out, c, nullptr);
        } else {
            const Resolved r = resolve(c);
            write_manifest(c.out, c, &r);
            sr = sweep(r.family, *r.params, r.seed, r.settings, static_cast<std::size_t>(c.window),
                       static_cast<unsigned>(c.threads));
            write_sweep(c.out, sr);
            if (!sr.failures.empty()) write_errors(c.out, failure_rows(sr.failures));
        }
        const ContinuityReport rep = discontinuity_scan(sr, *c.delta, static_cast<std::size_t>(c.window));
        write_scan(c.out, rep);
        ctx.out << "scan: " << rep.flagged << " of " << rep.points.size() << " points flagged at delta="
                << show(*c.delta) << " (fraction " << show(rep.flagged_fraction) << ")\n";
        for (const auto& p : rep.points)
            if (p.flagged) ctx.out << "  flagged lambda=" << show(p.lambda) << " osc=" << show(*p.osc) << '\n';
        return kExitOk;
    });
}

/// Human-readable summary of whatever outputs a directory holds.
inline std::string summarize(const fs::path& dir) {
    std::ostringstream s;
    const auto manifest = dir / "manifest";
    if (!fs::exists(manifest)) throw UsageError("no manifest in " + dir.string());
    const auto kv = read_manifest(manifest);
    auto get = [&](const std::string& k) {
        auto it = kv.find(k);
        return it == kv.end() ? std::string() : it->second;
    };
    s << "directory: " << dir.string() << '\n';
    s << "command:   " << get("command") << " (version " << get("version") << ")\n";
    s << "family:    " << get("family") << '\n';
    if (!get("cells_per_axis").empty()) s << "grid:      " << get("cells_per_axis") << " cells, width " << get("cell_width") << '\n';

    if (fs::exists(dir / "cover.txt")) {
        std::ifstream is(dir / "cover.txt");
        const BoxCover cover = read_cover(is);
        s << "attractor: " << cover.count() << " cells, invariance defect " << get("invariance_defect") << '\n';
    }
    if (fs::exists(dir / "trace.csv")) {
        const auto rows = detail::read_csv(dir / "trace.csv");
        s << "trace:     " << rows.size() << " iterations";
        if (!rows.empty()) s << ", last step " << rows.back()[2];
        s << '\n';
    }
    if (fs::exists(dir / "sweep.csv")) {
        const auto rows = detail::read_csv(dir / "sweep.csv");
        std::size_t conv = 0;
        for (const auto& r : rows) conv += r.size() == 4 && r[3] == "1";
        s << "sweep:     " << conv << " of " << rows.size() << " parameters converged\n";
    }
    if (fs::exists(dir / "dist.csv")) {
        double worst = 0.0;
        std::string where;
        for (const auto& r : detail::read_csv(dir / "dist.csv")) {
            const double v = detail::parse_double(r[2]);
            if (v > worst) {
                worst = v;
                where = r[0] + "," + r[1];
            }
        }
        s << "dist:      largest neighbour d_H " << format_double(worst) << " at (" << where << ")\n";
    }
    if (fs::exists(dir / "scan.csv")) {
        std::size_t flagged = 0, total = 0;
        std::string which;
        for (const auto& r : detail::read_csv(dir / "scan.csv")) {
            ++total;
            if (r[2] == "1") {
                ++flagged;
                which += (which.empty() ? "" : " ") + r[0];
            }
        }
        s << "scan:      " << flagged << " of " << total << " flagged" << (which.empty() ? "" : " (" + which + ")")
          << '\n';
    }
    if (fs::exists(dir / "equi.csv")) {
        const auto rows = detail::read_csv(dir / "equi.csv");
        if (!rows.empty())
            s << "equi:      e(" << rows.front()[0] << ")=" << rows.front()[1] << " ... e(" << rows.back()[0]
              << ")=" << rows.back()[1] << '\n';
    }
    if (fs::exists(dir / "dini.csv")) {
        std::size_t bad = 0, total = 0;
        for (const auto& r : detail::read_csv(dir / "dini.csv")) {
            ++total;
            bad += r[3] != "1";
        }
        s << "dini:      T=" << get("T_used") << ", " << total - bad << " of " << total
          << " nesting checks hold, max violation " << get("max_violation") << '\n';
    }
    if (fs::exists(dir / "errors.csv")) {
        const auto rows = detail::read_csv(dir / "errors.csv");
        s << "errors:    " << rows.size() << '\n';
        for (const auto& r : rows)
            if (r.size() >= 3) s << "  " << r[1] << " at lambda=" << r[0] << ": " << r[2] << '\n';
    }
    return s.str();
}

inline int cmd_report(const std::string& dir, CommandContext ctx = {}) {
    try {
        ctx.out << summarize(dir);
        return kExitOk;
    } catch (const UsageError& e) {
        ctx.err << "usage error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace attrlab::cli
